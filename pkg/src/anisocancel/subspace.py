"""Points of the complex Grassmannian and maps from the sphere into it.

A :class:`Subspace` stores an orthonormal frame; projections are derived on
demand.  A :class:`BundleMap` evaluates frames in batches because the
multiplier code needs one subspace per lattice frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "Subspace",
    "BundleMap",
    "IntersectionSpectrum",
    "HolderFit",
    "projection",
    "distance",
    "intersect",
    "intersect_family",
    "family_spectrum",
    "holder_estimate",
    "orthonormalize",
]


def orthonormalize(vectors, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the column span of ``vectors`` (rank cut at ``tol``)."""
    A = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if A.shape[1] == 0:
        return A.copy()
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > tol * max(scale, 1.0)))
    return U[:, :rank]


@dataclass(frozen=True, eq=False)
class Subspace:
    """k-dimensional subspace of C^l, held as an l x k frame with orthonormal columns."""

    frame: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.frame, dtype=complex)
        if F.ndim != 2:
            raise ValueError("frame must be a 2-d array")
        gram = F.conj().T @ F
        if not np.allclose(gram, np.eye(F.shape[1]), atol=1e-12, rtol=0):
            raise ValueError("frame columns are not orthonormal; use Subspace.span")
        F.setflags(write=False)
        object.__setattr__(self, "frame", F)

    @classmethod
    def span(cls, vectors, tol: float = 1e-10) -> "Subspace":
        """Subspace spanned by the columns of ``vectors``."""
        return cls(orthonormalize(vectors, tol))

    @classmethod
    def zero(cls, ambient_dim: int) -> "Subspace":
        return cls(np.zeros((ambient_dim, 0), dtype=complex))

    @classmethod
    def full(cls, ambient_dim: int) -> "Subspace":
        return cls(np.eye(ambient_dim, dtype=complex))

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def projection(self) -> np.ndarray:
        return self.frame @ self.frame.conj().T

    def complement(self) -> "Subspace":
        P = np.eye(self.ambient_dim) - self.projection()
        return Subspace.span(P)

    def contains(self, v, tol: float = 1e-10) -> bool:
        v = np.asarray(v, dtype=complex)
        r = v - self.frame @ (self.frame.conj().T @ v)
        return bool(np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(v)))

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def projection(s: Subspace) -> np.ndarray:
    """Orthogonal projection onto ``s`` as an l x l Hermitian matrix."""
    return s.projection()


def distance(s1: Subspace, s2: Subspace) -> float:
    """Hilbert-Schmidt norm of the difference of the two projections."""
    if s1.ambient_dim != s2.ambient_dim:
        raise ValueError("subspaces live in different ambient spaces")
    return float(np.linalg.norm(s1.projection() - s2.projection()))


def intersect(s1: Subspace, s2: Subspace, tol: float = 1e-8) -> Subspace:
    """Intersection as the null space of the stacked co-projections ``[(I - P1); (I - P2)]``."""
    if s1.ambient_dim != s2.ambient_dim:
        raise ValueError("subspaces live in different ambient spaces")
    ell = s1.ambient_dim
    I = np.eye(ell)
    M = np.vstack([I - s1.projection(), I - s2.projection()])
    _, s, Vh = np.linalg.svd(M)
    null = s <= tol
    return Subspace.span(Vh[null].conj().T) if np.any(null) else Subspace.zero(ell)


class IntersectionSpectrum(NamedTuple):
    """Eigen-decomposition of ``sum_i (I - P_i) / n``.

    Eigenvalues lie in [0, 1]; the numerical intersection is the span of the
    eigenvectors below ``tol``.  ``gap`` is the distance from the threshold
    region to the nearest rejected eigenvalue and ``ill_conditioned`` is set
    when it is smaller than ``10 * tol``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    tol: float
    dim: int
    gap: float
    ill_conditioned: bool


class BundleMap:
    """Continuous map from the unit sphere to G(l, k).

    Parameters
    ----------
    frame_fn
        Vectorised map from unit vectors of shape ``(n, d)`` to spanning
        frames of shape ``(n, l, k)``.  The frames need not be orthonormal;
        they are orthonormalised here.
    d, ambient_dim, dim
        Sphere dimension plus one, ``l`` and ``k``.
    holder_exponent
        Declared Holder exponent (metadata; see :func:`holder_estimate`).
    kind
        ``"closed-form"``, ``"sampled-with-interpolation"`` or ``"image-of-symbol"``.
    """

    def __init__(
        self,
        frame_fn: Callable[[np.ndarray], np.ndarray],
        d: int,
        ambient_dim: int,
        dim: int,
        holder_exponent: float = 1.0,
        kind: str = "closed-form",
        name: str = "",
        orthonormal: bool = False,
    ):
        if not 0 < holder_exponent <= 1:
            raise ValueError("holder_exponent must lie in (0, 1]")
        self._frame_fn = frame_fn
        self.d = int(d)
        self.ambient_dim = int(ambient_dim)
        self.dim = int(dim)
        self.holder_exponent = float(holder_exponent)
        self.kind = kind
        self.name = name
        self._orthonormal = orthonormal

    def frames(self, zetas) -> np.ndarray:
        """Orthonormal frames, shape ``(n, l, k)``."""
        Z = np.atleast_2d(np.asarray(zetas, dtype=float))
        F = np.asarray(self._frame_fn(Z), dtype=complex)
        if F.shape != (Z.shape[0], self.ambient_dim, self.dim):
            raise ValueError(
                f"bundle frame function returned shape {F.shape}, expected "
                f"{(Z.shape[0], self.ambient_dim, self.dim)}"
            )
        if self.dim == 0 or self._orthonormal:
            return F
        Q, R = np.linalg.qr(F)
        diag = np.abs(np.diagonal(R, axis1=-2, axis2=-1))
        if np.any(diag.min(axis=-1) <= 1e-12 * np.maximum(diag.max(axis=-1), 1e-300)):
            raise ValueError("bundle frame lost rank at some sphere point")
        return Q

    def projectors(self, zetas) -> np.ndarray:
        F = self.frames(zetas)
        return F @ np.conj(np.swapaxes(F, -1, -2))

    def project(self, zetas, vectors) -> np.ndarray:
        """Apply ``P_{Omega(zeta_i)}`` to ``vectors[i]`` (shape ``(n, l)``)."""
        F = self.frames(zetas)
        c = np.einsum("nlk,nl->nk", F.conj(), vectors)
        return np.einsum("nlk,nk->nl", F, c)

    def __call__(self, zeta) -> Subspace:
        return Subspace(self.frames(np.asarray(zeta, dtype=float)[None, :])[0])

    def __repr__(self) -> str:
        label = f"{self.name!r}, " if self.name else ""
        return f"BundleMap({label}d={self.d}, l={self.ambient_dim}, k={self.dim}, kind={self.kind!r})"


def family_spectrum(omega: BundleMap, nodes, tol: float = 1e-8) -> IntersectionSpectrum:
    """Spectrum of the averaged co-projection ``sum_i (I - P_i) / n`` over ``nodes``."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if nodes.shape[0] == 0:
        raise ValueError("empty node list")
    ell = omega.ambient_dim
    M = np.zeros((ell, ell), dtype=complex)
    chunk = 65536
    for start in range(0, nodes.shape[0], chunk):
        P = omega.projectors(nodes[start:start + chunk])
        M += P.shape[0] * np.eye(ell) - P.sum(axis=0)
    M /= nodes.shape[0]
    M = 0.5 * (M + M.conj().T)
    w, U = np.linalg.eigh(M)
    w = np.clip(w, 0.0, None)
    dim = int(np.sum(w <= tol))
    above = w[dim:]
    gap = float(above[0]) if above.size else np.inf
    return IntersectionSpectrum(w, U, tol, dim, gap, bool(gap < 10 * tol))


def intersect_family(omega: BundleMap, nodes, tol: float = 1e-8) -> Subspace:
    """Numerical intersection of ``Omega(zeta_i)`` over the sampled nodes.

    ``tol`` is compared with the eigenvalues of ``sum_i (I - P_i)`` divided by
    the node count, so the threshold does not drift with the sample size.
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if nodes.shape[0] < 2:
        raise ValueError("need at least two nodes")
    spec = family_spectrum(omega, nodes, tol)
    return Subspace.span(spec.eigenvectors[:, : spec.dim]) if spec.dim else Subspace.zero(omega.ambient_dim)


class HolderFit(NamedTuple):
    alpha: float
    constant: float
    exact: bool
    scales: np.ndarray
    moduli: np.ndarray


def _sphere_pairs(d: int, base: int, scale: float, rng: np.random.Generator):
    """Pairs of unit vectors at chordal distance ``scale``."""
    if d == 2:
        theta = 2 * np.pi * (np.arange(base) + rng.uniform()) / base
        dtheta = 2 * np.arcsin(min(scale, 2.0) / 2)
        z1 = np.column_stack([np.cos(theta), np.sin(theta)])
        z2 = np.column_stack([np.cos(theta + dtheta), np.sin(theta + dtheta)])
        return z1, z2
    z1 = rng.standard_normal((base, d))
    z1 /= np.linalg.norm(z1, axis=1, keepdims=True)
    u = rng.standard_normal((base, d))
    u -= np.sum(u * z1, axis=1, keepdims=True) * z1
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    ang = 2 * np.arcsin(min(scale, 2.0) / 2)
    z2 = np.cos(ang) * z1 + np.sin(ang) * u
    return z1, z2


def holder_estimate(
    omega: BundleMap,
    pairs: int = 2000,
    scales=None,
    seed: int = 0,
) -> HolderFit:
    """Fit ``w(t) ~ C t^alpha`` for the modulus of continuity of ``omega``.

    For each chordal scale ``t`` the modulus ``w(t)`` is the largest HS
    distance over ``pairs`` pairs at that separation.  On the circle the base
    points are an equispaced grid with a random offset, which guarantees that
    some pair straddles any isolated singular point once ``t`` exceeds the
    grid step.  A bundle that never moves returns ``exact=True`` and
    ``alpha=inf``.
    """
    if pairs < 10:
        raise ValueError("pairs must be at least 10")
    rng = np.random.default_rng(seed)
    if scales is None:
        t_min = 4 * 2 * np.pi / pairs if omega.d == 2 else 1e-3
        scales = np.geomspace(0.5, max(t_min, 1e-4), 12)
    scales = np.asarray(scales, dtype=float)
    moduli = np.empty(scales.size)
    for i, t in enumerate(scales):
        z1, z2 = _sphere_pairs(omega.d, pairs, t, rng)
        diff = omega.projectors(z1) - omega.projectors(z2)
        moduli[i] = np.sqrt(np.sum(np.abs(diff) ** 2, axis=(1, 2))).max()
    if np.all(moduli <= 1e-13):
        return HolderFit(np.inf, 0.0, True, scales, moduli)
    keep = moduli > 1e-13
    slope, intercept = np.polyfit(np.log(scales[keep]), np.log(moduli[keep]), 1)
    return HolderFit(float(slope), float(np.exp(intercept)), False, scales, moduli)
