"""Anisotropic dilations, the quasi-norm eta, polar coordinates and sphere quadrature.

Frequencies are points ``xi`` of R^d.  A pattern ``a`` (positive, summing to
``d``) defines the dilations ``Dil_t(xi) = (t^{-a_1} xi_1, ..., t^{-a_d} xi_d)``
and the quasi-norm ``eta(xi)``, the unique ``t`` with ``Dil_t(xi)`` on the unit
sphere.  Every routine here accepts either a single point of shape ``(d,)`` or
a stack of points of shape ``(..., d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "HomogeneityPattern",
    "PolarPoint",
    "SphereQuadrature",
    "RadialGrid",
    "dilate",
    "eta",
    "eta_equivalence_constants",
    "polar_decompose",
    "polar_coordinates",
    "jacobian",
    "sphere_quadrature",
    "graded_circle_quadrature",
    "radial_grid",
    "polar_integrate",
    "compensated_sum",
]

_MIN_EXPONENT = 1e-3


def compensated_sum(values) -> complex | float:
    """Order-independent sum of a real or complex array (``math.fsum`` per part)."""
    v = np.asarray(values).ravel()
    if np.iscomplexobj(v):
        return complex(math.fsum(v.real), math.fsum(v.imag))
    return math.fsum(v)


def _parse_real(token: str | float | Fraction) -> float:
    if isinstance(token, str):
        return float(Fraction(token.strip()))
    return float(token)


@dataclass(frozen=True)
class HomogeneityPattern:
    """Pattern of homogeneity: positive exponents ``a`` with ``sum(a) == d``.

    Inputs whose sum is within ``1e-6 * d`` of ``d`` are rescaled so the sum is
    exact to rounding; anything further off is rejected rather than silently
    renormalised.
    """

    a: tuple[float, ...]

    def __post_init__(self):
        a = np.array([_parse_real(x) for x in self.a], dtype=float)
        d = a.size
        if d < 2:
            raise ValueError("a homogeneity pattern needs dimension d >= 2")
        total = a.sum()
        if abs(total - d) > 1e-6 * d:
            raise ValueError(f"pattern exponents must sum to d={d}, got {total!r}")
        a = a * (d / total)
        if np.any(a < _MIN_EXPONENT) or np.any(a > d - _MIN_EXPONENT):
            raise ValueError(
                f"pattern exponents must lie in [{_MIN_EXPONENT}, d - {_MIN_EXPONENT}], got {a.tolist()}"
            )
        object.__setattr__(self, "a", tuple(float(x) for x in a))

    @classmethod
    def isotropic(cls, d: int) -> "HomogeneityPattern":
        return cls((1.0,) * d)

    @classmethod
    def parse(cls, text: str) -> "HomogeneityPattern":
        """Parse ``"3/2, 3/4, 3/4"`` or ``"1.5 0.75 0.75"``."""
        tokens = text.replace(",", " ").split()
        return cls(tuple(_parse_real(t) for t in tokens))

    @property
    def d(self) -> int:
        return len(self.a)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.a)

    @property
    def is_isotropic(self) -> bool:
        return all(abs(x - 1.0) < 1e-14 for x in self.a)


@dataclass(frozen=True)
class PolarPoint:
    eta: float
    zeta: tuple[float, ...]

    def reconstruct(self, a: HomogeneityPattern) -> np.ndarray:
        """Invert the decomposition: ``xi_j = eta^{a_j} zeta_j``."""
        return dilate(1.0 / self.eta, np.array(self.zeta), a)


def _as_pattern(a) -> HomogeneityPattern:
    return a if isinstance(a, HomogeneityPattern) else HomogeneityPattern(tuple(a))


def dilate(t, xi, a) -> np.ndarray:
    """Apply ``Dil_t``.  ``t`` may be a scalar or broadcast against ``xi[..., 0]``."""
    a = _as_pattern(a)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("dilation parameter t must be positive")
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != a.d:
        raise ValueError(f"point dimension {xi.shape[-1]} does not match pattern dimension {a.d}")
    return xi * np.power(t[..., None], -a.array)


def _log_eta(xi: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Solve ``sum_j xi_j^2 exp(-2 a_j s) = 1`` for ``s = log eta``.

    ``g(s) = log sum_j exp(2 log|xi_j| - 2 a_j s)`` is convex and strictly
    decreasing, so Newton started at the left bracket end increases
    monotonically to the root.  The bracket is kept anyway and any step that
    leaves it falls back to bisection.
    """
    shape = xi.shape[:-1]
    # coordinate-major layout: reductions over d become elementwise adds
    X = np.abs(xi).reshape(-1, a.size).T
    with np.errstate(divide="ignore"):
        logx = np.log(X)
    lo = np.max(logx / a[:, None], axis=0)  # one term equals 1 here, so g(lo) >= 0
    hi = lo + math.log(a.size) / (2.0 * a.min())  # every term <= 1/d here
    s = lo.copy()
    active = np.arange(s.size)
    for _ in range(200):
        if active.size == 0:
            break
        sa, la, ha, lx = s[active], lo[active], hi[active], logx[:, active]
        e = 2.0 * lx - 2.0 * a[:, None] * sa
        m = np.max(e, axis=0)
        w = np.exp(e - m)
        sw = w.sum(axis=0)
        g = m + np.log(sw)
        dg = -2.0 * (a @ w) / sw
        pos = g > 0
        la = np.where(pos, sa, la)
        ha = np.where(pos, ha, sa)
        s_new = sa - g / dg
        outside = ((s_new < la) | (s_new > ha)) & (g != 0)
        s_new = np.where(outside, 0.5 * (la + ha), s_new)
        s_new = np.where(g == 0, sa, s_new)
        delta = np.abs(s_new - sa)
        s[active], lo[active], hi[active] = s_new, la, ha
        # quadratic convergence: one more step after 1e-9 lands at rounding level
        done = (delta <= 1e-9 * (1.0 + np.abs(s_new))) & ~outside
        if np.any(done):
            idx = active[done]
            e = 2.0 * logx[:, idx] - 2.0 * a[:, None] * s[idx]
            m = np.max(e, axis=0)
            w = np.exp(e - m)
            sw = w.sum(axis=0)
            s[idx] = s[idx] + (m + np.log(sw)) * sw / (2.0 * (a @ w))
        active = active[~done]
    return s.reshape(shape)


def eta(xi, a) -> float | np.ndarray:
    """Quasi-norm ``eta(xi)``: the root of ``sum_j xi_j^2 / eta^{2 a_j} = 1``.

    Accurate to about 1e-15 relative.  Raises ``ValueError`` at ``xi = 0``.

    >>> float(eta([3.0, 4.0], (1, 1)))
    5.0
    """
    a = _as_pattern(a)
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != a.d:
        raise ValueError(f"point dimension {xi.shape[-1]} does not match pattern dimension {a.d}")
    if np.any(np.all(xi == 0, axis=-1)):
        raise ValueError("eta is undefined at the origin")
    out = np.exp(_log_eta(xi, a.array))
    return float(out) if out.ndim == 0 else out


def polar_coordinates(xi, a) -> tuple[np.ndarray, np.ndarray]:
    """Batched ``(eta, zeta)`` for an array of nonzero points."""
    a = _as_pattern(a)
    xi = np.asarray(xi, dtype=float)
    h = np.asarray(eta(xi, a))
    zeta = xi * np.power(h[..., None], -a.array)
    # project away the last ulp so |zeta| = 1 to rounding
    zeta = zeta / np.linalg.norm(zeta, axis=-1, keepdims=True)
    return h, zeta


def polar_decompose(xi, a) -> PolarPoint:
    h, z = polar_coordinates(np.asarray(xi, dtype=float), a)
    return PolarPoint(float(h), tuple(float(x) for x in z))


def jacobian(zeta, a) -> float | np.ndarray:
    """Weight ``J(zeta) = sum_j a_j zeta_j^2`` of the anisotropic polar change of variables."""
    a = _as_pattern(a)
    z = np.asarray(zeta, dtype=float)
    norms = np.linalg.norm(z, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-10):
        raise ValueError("jacobian expects unit vectors")
    out = (z * z) @ a.array
    return float(out) if np.ndim(out) == 0 else out


def eta_equivalence_constants(a, samples: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Empirical constants with ``c_low * rho <= eta <= c_high * rho``.

    ``rho(xi) = (sum_j |xi_j|^{2/a_j})^{1/2}`` is the explicit substitute for
    ``eta``.  Both sides have the same dilation law, so the ratio depends only
    on ``zeta`` and the samples are taken on the unit sphere (where
    ``eta == 1``), plus the coordinate poles.
    """
    a = _as_pattern(a)
    if samples < 100:
        raise ValueError("need at least 100 samples")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, a.d))
    z = x / np.linalg.norm(x, axis=-1, keepdims=True)
    z = np.vstack([z, np.eye(a.d)])
    ratio = 1.0 / _rho(z, a)
    return float(ratio.min()), float(ratio.max())


def _rho(xi: np.ndarray, a: HomogeneityPattern) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(xi) ** (2.0 / a.array), axis=-1))


@dataclass(frozen=True)
class SphereQuadrature:
    """Nodes on ``S^{d-1}`` with surface-measure weights.

    ``degree`` is the largest total degree of polynomials integrated exactly.
    """

    nodes: np.ndarray
    weights: np.ndarray
    degree: int
    resolution: tuple[int, ...]
    kind: str = "product"

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    def __len__(self) -> int:
        return self.weights.size

    def integrate(self, values) -> complex | float:
        """Sum ``values`` (one per node, leading axis) against the weights."""
        v = np.asarray(values)
        if v.ndim == 1:
            return compensated_sum(self.weights * v)
        return np.tensordot(self.weights, v, axes=(0, 0))

    def refined(self, factor: int = 2) -> "SphereQuadrature":
        if self.kind == "axis-graded":
            return graded_circle_quadrature(factor * self.resolution[0])
        return sphere_quadrature(self.d, *(factor * r for r in self.resolution))


def sphere_quadrature(d: int, n: int | None = None, n_az: int | None = None) -> SphereQuadrature:
    """Product quadrature on the unit circle (d=2) or sphere (d=3).

    d=2: trapezoid rule on ``n`` equispaced angles (default 512), exact for
    trigonometric polynomials of degree below ``n``.
    d=3: ``n`` Gauss-Legendre nodes in ``cos(theta)`` (default 64) times an
    ``n_az``-point azimuthal trapezoid rule (default 128).
    """
    if d == 2:
        n = 512 if n is None else int(n)
        if n < 3:
            raise ValueError("need at least 3 nodes on the circle")
        phi = 2.0 * np.pi * np.arange(n) / n
        nodes = np.column_stack([np.cos(phi), np.sin(phi)])
        weights = np.full(n, 2.0 * np.pi / n)
        return SphereQuadrature(nodes, weights, n - 1, (n,))
    if d == 3:
        n = 64 if n is None else int(n)
        n_az = 2 * n if n_az is None else int(n_az)
        x, wx = np.polynomial.legendre.leggauss(n)
        phi = 2.0 * np.pi * np.arange(n_az) / n_az
        st = np.sqrt(1.0 - x * x)
        X = np.outer(st, np.cos(phi))
        Y = np.outer(st, np.sin(phi))
        Z = np.repeat(x[:, None], n_az, axis=1)
        nodes = np.column_stack([Z.ravel(), X.ravel(), Y.ravel()])
        weights = np.outer(wx, np.full(n_az, 2.0 * np.pi / n_az)).ravel()
        return SphereQuadrature(nodes, weights, min(2 * n - 1, n_az - 1), (n, n_az))
    raise ValueError("sphere quadrature is only built for d = 2 or d = 3")


def graded_circle_quadrature(n: int = 128) -> SphereQuadrature:
    """Circle rule with nodes clustered at the four coordinate axes.

    Each quarter arc gets an ``n``-point tanh-sinh rule, which keeps
    exponential convergence for integrands with power-type kinks such as
    ``|zeta_1|^s`` at ``zeta_1 = 0``.  ``degree`` is reported as 0 because the
    rule is not polynomially exact.
    """
    n = int(n)
    if n < 8:
        raise ValueError("need at least 8 nodes per quarter arc")
    T = 3.0
    t = np.linspace(-T, T, n)
    h = t[1] - t[0]
    u = np.tanh(0.5 * np.pi * np.sinh(t))
    du = h * 0.5 * np.pi * np.cosh(t) / np.cosh(0.5 * np.pi * np.sinh(t)) ** 2
    phi = np.concatenate([0.25 * np.pi * (1.0 + u) + k * 0.5 * np.pi for k in range(4)])
    w = np.tile(0.25 * np.pi * du, 4)
    nodes = np.column_stack([np.cos(phi), np.sin(phi)])
    return SphereQuadrature(nodes, w, 0, (n,), kind="axis-graded")


@dataclass(frozen=True)
class RadialGrid:
    """Quadrature nodes and weights in ``eta`` on ``[lo, hi]``."""

    nodes: np.ndarray
    weights: np.ndarray
    lo: float
    hi: float


def radial_grid(lo: float, hi: float, points_per_decade: int = 256, order: int = 3) -> RadialGrid:
    """Geometric panels on ``[lo, hi]`` with Gauss-Legendre nodes in ``log(eta)``.

    Near-homogeneous integrands are smooth in ``log(eta)``, which is why the
    panels are geometric.
    """
    if not (0 < lo < hi):
        raise ValueError("radial grid needs 0 < lo < hi")
    decades = math.log10(hi / lo)
    panels = max(1, math.ceil(points_per_decade * decades))
    edges = np.linspace(math.log(lo), math.log(hi), panels + 1)
    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s = (mid[:, None] + half[:, None] * x).ravel()
    ws = (half[:, None] * w).ravel()
    nodes = np.exp(s)
    return RadialGrid(nodes, ws * nodes, lo, hi)  # d(eta) = eta d(log eta)


def polar_integrate(
    psi: Callable[[np.ndarray], np.ndarray],
    a,
    quad: SphereQuadrature,
    eta_grid: RadialGrid,
) -> complex:
    """Integrate ``psi`` over ``{lo <= eta <= hi}`` in anisotropic polar coordinates.

    Evaluates ``int eta^{d-1} sum_i w_i J(zeta_i) psi(Dil_{1/eta}(zeta_i)) d eta``.
    ``psi`` receives an array of points of shape ``(m, d)``.
    """
    a = _as_pattern(a)
    if eta_grid.nodes.size == 0:
        raise ValueError("empty radial grid")
    if quad.d != a.d:
        raise ValueError("quadrature and pattern dimensions differ")
    J = jacobian(quad.nodes, a)
    sphere_w = quad.weights * J
    d = a.d
    parts = []
    # block over radial nodes to bound memory
    block = max(1, 2_000_000 // len(quad))
    for start in range(0, eta_grid.nodes.size, block):
        r = eta_grid.nodes[start:start + block]
        wr = eta_grid.weights[start:start + block]
        pts = quad.nodes[None, :, :] * np.power(r[:, None, None], a.array)
        vals = np.asarray(psi(pts.reshape(-1, d))).reshape(r.size, len(quad))
        parts.append((wr * r ** (d - 1))[:, None] * sphere_w[None, :] * vals)
    total = compensated_sum(np.concatenate([p.ravel() for p in parts]))
    return complex(total)
