"""Concrete bundle maps: constants, the GN line bundle, KMS hyperplanes, sampled data."""

from __future__ import annotations

import numpy as np

from .geometry import HomogeneityPattern
from .subspace import BundleMap, Subspace

__all__ = [
    "constant_bundle",
    "vector_bundle",
    "gn_bundle",
    "gn_pattern",
    "kms_bundle",
    "kms_pattern",
    "kms_normal",
    "sampled_bundle",
]


def constant_bundle(subspace: Subspace | np.ndarray, d: int) -> BundleMap:
    """``Omega(zeta) = L`` for every ``zeta``."""
    L = subspace if isinstance(subspace, Subspace) else Subspace.span(subspace)
    F = L.frame

    def frames(z):
        return np.broadcast_to(F, (z.shape[0],) + F.shape)

    return BundleMap(frames, d, L.ambient_dim, L.dim, kind="closed-form",
                     name=f"constant(dim={L.dim})", orthonormal=True)


def vector_bundle(fn, d: int, ambient_dim: int, dim: int = 1, name: str = "",
                  holder_exponent: float = 1.0) -> BundleMap:
    """Bundle spanned by ``fn(zetas)``; ``fn`` returns ``(n, l)`` for lines or ``(n, l, k)``."""

    def frames(z):
        v = np.asarray(fn(z))
        return v[:, :, None] if v.ndim == 2 else v

    return BundleMap(frames, d, ambient_dim, dim, holder_exponent=holder_exponent,
                     kind="closed-form", name=name)


def gn_pattern() -> HomogeneityPattern:
    return HomogeneityPattern((1.5, 0.75, 0.75))


def gn_bundle() -> BundleMap:
    """``Omega(zeta) = C (zeta_1, zeta_2^2 + zeta_3^2)`` on ``S^2``: the image of ``(d_1, Laplacian_{x2,x3})``."""
    return vector_bundle(
        lambda z: np.column_stack([z[:, 0], z[:, 1] ** 2 + z[:, 2] ** 2]),
        d=3, ambient_dim=2, name="gn3",
    )


def kms_pattern(kappa: int, lam: int) -> HomogeneityPattern:
    """Pattern making ``xi_1^kappa`` and ``xi_2^lambda`` of equal order.

    ``a_1 kappa = a_2 lambda`` with ``a_1 + a_2 = 2`` gives
    ``a = (2 lambda, 2 kappa) / (kappa + lambda)``.
    """
    s = kappa + lam
    return HomogeneityPattern((2.0 * lam / s, 2.0 * kappa / s))


def kms_normal(zeta, kappa: int, lam: int, N: int) -> np.ndarray:
    """Normal ``n_j = zeta_1^{j kappa} zeta_2^{(N - j) lambda}``, ``j = 0..N``.

    This is the annihilator of the image of the staircase system symbol.  It
    never vanishes on the circle (``n_N = zeta_1^{N kappa}``, ``n_0 = zeta_2^{N lambda}``).
    """
    z = np.atleast_2d(np.asarray(zeta, dtype=float))
    j = np.arange(N + 1)
    return z[:, :1] ** (j * kappa) * z[:, 1:2] ** ((N - j) * lam)


def kms_bundle(kappa: int, lam: int, N: int) -> tuple[BundleMap, HomogeneityPattern]:
    """Hyperplane bundle ``{v in C^{N+1} : sum_j n_j(zeta) v_j = 0}`` with its pattern."""
    if kappa < 1 or lam < 1 or N < 1:
        raise ValueError("kappa, lambda and N must be positive integers")

    def frames(z):
        n = kms_normal(z, kappa, lam, N).astype(complex)
        Q, _ = np.linalg.qr(n[:, :, None], mode="complete")
        return Q[:, :, 1:]

    omega = BundleMap(frames, 2, N + 1, N, kind="closed-form",
                      name=f"kms(kappa={kappa}, lambda={lam}, N={N})", orthonormal=True)
    return omega, kms_pattern(kappa, lam)


def sampled_bundle(nodes, spans, power: float = 2.0) -> BundleMap:
    """Interpolate subspaces given at sample points.

    Projectors are blended with inverse-distance (Shepard) weights and the top
    ``k`` eigenvectors of the blend are returned, so the map reproduces the
    samples exactly and is continuous in between.
    """
    nodes = np.asarray(nodes, dtype=float)
    nodes = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
    subs = [s if isinstance(s, Subspace) else Subspace.span(s) for s in spans]
    dims = {s.dim for s in subs}
    ells = {s.ambient_dim for s in subs}
    if len(dims) != 1 or len(ells) != 1:
        raise ValueError("sampled subspaces must share dimension and ambient dimension")
    k, ell = dims.pop(), ells.pop()
    P = np.stack([s.projection() for s in subs])

    def frames(z):
        dist = np.linalg.norm(z[:, None, :] - nodes[None, :, :], axis=-1)
        hit = dist < 1e-14
        with np.errstate(divide="ignore"):
            w = np.where(hit, 0.0, dist ** -power)
        exact = hit.any(axis=1)
        w[exact] = hit[exact].astype(float)
        w /= w.sum(axis=1, keepdims=True)
        M = np.einsum("ns,sij->nij", w, P)
        _, U = np.linalg.eigh(M)
        return U[:, :, ell - k:]

    return BundleMap(frames, nodes.shape[1], ell, k, kind="sampled-with-interpolation",
                     name="sampled", orthonormal=True)
