"""Decision procedures: bundle cancellation, weak cancellation and its extension,
Mikhlin cancellation of kernels, Dini moduli and the bilinear condition.

All sphere integrals carry the weight ``J(zeta) = sum_j a_j zeta_j^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, special

from .bundles import kms_pattern
from .geometry import HomogeneityPattern, SphereQuadrature, compensated_sum, jacobian
from .subspace import BundleMap, Subspace, family_spectrum
from .symbols import FunctionalField, MatrixPolynomial, NonEllipticError, evaluate

__all__ = [
    "CancellationReport",
    "ExtensionError",
    "canceling_check",
    "weak_cancellation_check",
    "extend_functional",
    "total_cancellation_residual",
    "sphere_basis",
    "mikhlin_cancellation_check",
    "dini_modulus",
    "bilinear_condition",
    "bilinear_reduced_integral",
    "bilinear_family_symbols",
    "bilinear_family_sphere",
    "bilinear_family_reduced",
    "line_condition_beta",
    "predicted_vanishing",
]


@dataclass(frozen=True)
class CancellationReport:
    """Outcome of a cancellation check.

    ``V`` is the sampled common intersection of the fibres.  ``residuals``
    holds one weak-cancellation integral per basis vector of ``V`` (empty for
    a plain bundle check).  ``refinement_stable`` is True when doubling the
    quadrature leaves ``dim V`` unchanged.
    """

    V: Subspace
    v_dim: int
    is_canceling: bool
    spectral_gap: float
    ill_conditioned: bool
    refinement_stable: bool
    residuals: tuple[complex, ...] = ()
    normalizer: float = 0.0
    is_weakly_canceling: bool | None = None

    def to_dict(self) -> dict:
        return {
            "v_dim": self.v_dim,
            "is_canceling": self.is_canceling,
            "is_weakly_canceling": self.is_weakly_canceling,
            "spectral_gap": self.spectral_gap,
            "ill_conditioned": self.ill_conditioned,
            "refinement_stable": self.refinement_stable,
            "residuals": [[r.real, r.imag] for r in self.residuals],
            "normalizer": self.normalizer,
        }


def canceling_check(omega: BundleMap, quad: SphereQuadrature, tol: float = 1e-8) -> CancellationReport:
    """Is the intersection of ``Omega(zeta)`` over the nodes trivial?"""
    spec = family_spectrum(omega, quad.nodes, tol)
    fine = family_spectrum(omega, quad.refined().nodes, tol)
    V = Subspace.span(spec.eigenvectors[:, : spec.dim]) if spec.dim else Subspace.zero(omega.ambient_dim)
    return CancellationReport(
        V=V,
        v_dim=spec.dim,
        is_canceling=spec.dim == 0,
        spectral_gap=float(spec.gap),
        ill_conditioned=spec.ill_conditioned or fine.ill_conditioned,
        refinement_stable=spec.dim == fine.dim,
    )


def weak_cancellation_check(
    B: FunctionalField,
    omega: BundleMap,
    a: HomogeneityPattern,
    quad: SphereQuadrature,
    tol: float = 1e-8,
) -> CancellationReport:
    """Check ``int B(zeta)[v] J(zeta) dsigma = 0`` for every ``v`` in ``V``.

    The residuals are compared with ``tol`` times ``sum_i w_i |B(zeta_i)|`` so
    the verdict does not depend on the scale of ``B``.
    """
    base = canceling_check(omega, quad, tol)
    C = B.covectors(quad.nodes)
    J = jacobian(quad.nodes, a)
    normalizer = float(compensated_sum(quad.weights * np.linalg.norm(C, axis=1)))
    residuals = []
    for v in base.V.frame.T:
        residuals.append(complex(compensated_sum(quad.weights * J * (C @ v))))
    worst = max((abs(r) for r in residuals), default=0.0)
    weakly = worst <= tol * normalizer if normalizer > 0 else True
    return CancellationReport(
        V=base.V,
        v_dim=base.v_dim,
        is_canceling=base.is_canceling,
        spectral_gap=base.spectral_gap,
        ill_conditioned=base.ill_conditioned,
        refinement_stable=base.refinement_stable,
        residuals=tuple(residuals),
        normalizer=normalizer,
        is_weakly_canceling=bool(weakly),
    )


class ExtensionError(ValueError):
    pass


def sphere_basis(zetas: np.ndarray, size: int) -> np.ndarray:
    """Smooth real basis on the sphere, shape ``(n, m)``.

    Circle: ``1, cos(j phi), sin(j phi)`` for ``j <= size``.  Sphere: real
    spherical harmonics of degree ``<= size`` with the pole on the first axis.
    """
    z = np.atleast_2d(zetas)
    if z.shape[1] == 2:
        phi = np.arctan2(z[:, 1], z[:, 0])
        cols = [np.ones_like(phi)]
        for j in range(1, size + 1):
            cols += [np.cos(j * phi), np.sin(j * phi)]
        return np.column_stack(cols)
    if z.shape[1] == 3:
        theta = np.arccos(np.clip(z[:, 0], -1.0, 1.0))
        phi = np.arctan2(z[:, 2], z[:, 1])
        cols = []
        for n in range(size + 1):
            for m in range(0, n + 1):
                Y = special.sph_harm_y(n, m, theta, phi)
                if m == 0:
                    cols.append(Y.real)
                else:
                    cols += [math.sqrt(2) * Y.real, math.sqrt(2) * Y.imag]
        return np.column_stack(cols)
    raise ValueError("sphere_basis supports d = 2 and d = 3")


def _functional_moment(F: FunctionalField, a: HomogeneityPattern, quad: SphereQuadrature) -> tuple[np.ndarray, float]:
    """``int B(zeta) J dsigma`` as a row, and the L1 scale ``int |B| J dsigma``."""
    C = F.covectors(quad.nodes)
    wJ = quad.weights * jacobian(quad.nodes, a)
    row = np.array([compensated_sum(wJ * C[:, j]) for j in range(C.shape[1])])
    scale = float(compensated_sum(wJ * np.linalg.norm(C, axis=1)))
    return row, scale


def total_cancellation_residual(F: FunctionalField, a: HomogeneityPattern, quad: SphereQuadrature) -> float:
    """``max_j |int F(zeta)[e_j] J dsigma|`` divided by ``int |F(zeta)| J dsigma``."""
    row, scale = _functional_moment(F, a, quad)
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(row)) / scale)


def extend_functional(
    B: FunctionalField,
    omega: BundleMap,
    a: HomogeneityPattern,
    quad: SphereQuadrature,
    basis_size: int = 6,
    tol: float = 1e-8,
) -> FunctionalField:
    """Extend a weakly canceling ``B`` to a totally canceling functional on ``C^l``.

    The extension is ``B~(zeta)[v] = B(zeta)[P v] + <b(zeta), P_perp v>`` with
    ``<x, y> = x^* y``.  The correction ``b`` is expanded in
    :func:`sphere_basis` and chosen as the minimum-norm least-squares solution
    of ``int P_perp(zeta) b(zeta) J dsigma = -conj(int B(zeta) P(zeta) J dsigma)``.
    Raises :class:`ExtensionError` when the basis cannot reach the target.
    """
    if a.d != omega.d or quad.d != omega.d:
        raise ValueError("pattern, quadrature and bundle dimensions differ")
    check = weak_cancellation_check(B, omega, a, quad, tol)
    if not check.is_weakly_canceling:
        raise ExtensionError("functional is not weakly canceling; no canceling extension exists")
    ell = omega.ambient_dim
    nodes = quad.nodes
    row, scale = _functional_moment(B, a, quad)
    target = -np.conj(row)
    Phi = sphere_basis(nodes, basis_size)  # (n, m)
    Pperp = np.eye(ell) - omega.projectors(nodes)  # (n, l, l)
    wJ = quad.weights * jacobian(nodes, a)
    # T[:, (m, l')] = sum_i wJ_i Phi_im Pperp_i[:, l']
    T = np.einsum("n,nm,nlk->lmk", wJ, Phi, Pperp).reshape(ell, -1)
    beta, *_ = np.linalg.lstsq(T, target, rcond=1e-12)
    miss = float(np.linalg.norm(T @ beta - target))
    if miss > tol * max(scale, np.linalg.norm(target), 1e-300):
        raise ExtensionError(
            f"extension basis too small: least-squares residual {miss:.3g} (basis_size={basis_size})"
        )
    coeffs = beta.reshape(Phi.shape[1], ell)

    def covectors(z):
        b = sphere_basis(z, basis_size) @ coeffs  # (n, l)
        P = omega.projectors(z)
        first = np.einsum("nl,nlm->nm", B.raw(z), P)
        second = np.einsum("nl,nlm->nm", b.conj(), np.eye(ell) - P)
        return first + second

    ext = FunctionalField(covectors, omega, extended=True, name=f"extension of {B.name or 'B'}")
    ext.coefficients = coeffs
    ext.basis_size = basis_size
    return ext


def mikhlin_cancellation_check(
    K: Callable[[np.ndarray], np.ndarray],
    a: HomogeneityPattern,
    quad: SphereQuadrature,
    tol: float = 1e-8,
) -> tuple[complex, bool]:
    """``(int J K dsigma, passes)`` with pass meaning ``|residual| < tol * int |K| dsigma``."""
    vals = np.asarray(K(quad.nodes), dtype=complex)
    J = jacobian(quad.nodes, a)
    residual = complex(compensated_sum(quad.weights * J * vals))
    scale = float(compensated_sum(quad.weights * np.abs(vals)))
    return residual, bool(abs(residual) < tol * scale) if scale > 0 else True


class DiniModulus(NamedTuple):
    scales: np.ndarray
    modulus: np.ndarray
    dini_sum: float


def dini_modulus(
    K: Callable[[np.ndarray], np.ndarray],
    scales,
    d: int = 2,
    samples: int = 4096,
    seed: int = 0,
) -> DiniModulus:
    """Sampled modulus ``w(t) = sup |K(z1) - K(z2)|`` over ``|z1 - z2| <= t``.

    ``scales`` must decrease within ``(0, 1]``.  On the circle the base points
    are an equispaced grid fine enough to straddle any point at the smallest
    scale.  ``dini_sum`` is the trapezoid rule for ``int w(t) dt / t`` in
    ``log t`` over the given scales.
    """
    t = np.asarray(scales, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) >= 0) or t[0] > 1 or t[-1] <= 0:
        raise ValueError("scales must be a decreasing sequence in (0, 1]")
    rng = np.random.default_rng(seed)
    raw = np.empty(t.size)
    for i, s in enumerate(t):
        if d == 2:
            base = max(samples, int(math.ceil(8 * math.pi / s)))
            phi = 2 * np.pi * (np.arange(base) + rng.uniform()) / base
            dphi = 2 * math.asin(s / 2)
            z1 = np.column_stack([np.cos(phi), np.sin(phi)])
            z2 = np.column_stack([np.cos(phi + dphi), np.sin(phi + dphi)])
        else:
            z1 = rng.standard_normal((samples, d))
            z1 /= np.linalg.norm(z1, axis=1, keepdims=True)
            u = rng.standard_normal((samples, d))
            u -= np.sum(u * z1, axis=1, keepdims=True) * z1
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            ang = 2 * math.asin(s / 2)
            z2 = math.cos(ang) * z1 + math.sin(ang) * u
        raw[i] = float(np.max(np.abs(np.asarray(K(z1)) - np.asarray(K(z2)))))
    # sup over separations <= t: running max from the small end
    w = np.maximum.accumulate(raw[::-1])[::-1]
    logt = np.log(t)
    dini = float(np.sum(0.5 * (w[1:] + w[:-1]) * (logt[:-1] - logt[1:])))
    return DiniModulus(t, w, dini)


def bilinear_condition(
    P1: MatrixPolynomial,
    P2: MatrixPolynomial,
    Q: Callable[[np.ndarray], np.ndarray],
    a: HomogeneityPattern,
    quad: SphereQuadrature,
    tol: float = 1e-10,
) -> complex:
    """``int Q(zeta) J(zeta) / (P1(zeta) conj(P2(zeta))) dsigma`` by quadrature."""
    for P in (P1, P2):
        if P.rows != 1 or P.cols != 1:
            raise ValueError("bilinear_condition expects scalar symbols")
    p1 = evaluate(P1, quad.nodes)[:, 0, 0]
    p2 = evaluate(P2, quad.nodes)[:, 0, 0]
    for name, p in (("P1", p1), ("P2", p2)):
        mag = np.abs(p)
        if mag.min() <= tol * max(mag.max(), 1e-300):
            i = int(np.argmin(mag))
            raise NonEllipticError(f"{name} vanishes on the sphere", quad.nodes[i], float(mag[i]))
    J = jacobian(quad.nodes, a)
    vals = np.asarray(Q(quad.nodes), dtype=complex) * J / (p1 * np.conj(p2))
    return complex(compensated_sum(quad.weights * vals))


def line_condition_beta(kappa: int, lam: int, alpha: float) -> float:
    """The ``beta`` with ``(alpha + 1/2)/kappa + (beta + 1/2)/lambda = 1``."""
    return lam * (1.0 - (alpha + 0.5) / kappa) - 0.5


def _has_real_root(kappa: int, c: complex) -> bool:
    c = complex(c)
    if abs(c.imag) > 1e-14 * max(1.0, abs(c)):
        return False
    return kappa % 2 == 1 or c.real >= 0


def _complete_homogeneous(t: complex, s: complex, n: int) -> np.ndarray:
    h = np.empty(n, dtype=complex)
    h[0] = 1.0
    for j in range(1, n):
        h[j] = s * h[j - 1] + t ** j
    return h


def bilinear_reduced_integral(
    kappa: int,
    lam: int,
    alpha: float,
    beta: float,
    tau1: complex,
    sigma1: complex,
    cutoff: float | None = None,
) -> complex:
    """``int_R |rho|^{2 alpha} / ((rho^kappa - tau1)(rho^kappa - sigma1)) d rho``.

    Adaptive quadrature on ``[-cutoff, cutoff]`` plus the tails from the
    expansion ``1/((x - t)(x - s)) = sum_n h_n(t, s) x^{-n-2}``, ``x = rho^kappa``,
    which converges for ``|rho|^kappa > max(|tau1|, |sigma1|)``.
    """
    if abs((alpha + 0.5) / kappa + (beta + 0.5) / lam - 1.0) > 1e-10:
        raise ValueError("exponents violate the line condition (alpha+1/2)/kappa + (beta+1/2)/lambda = 1")
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be nonnegative")
    for name, c in (("tau1", tau1), ("sigma1", sigma1)):
        if _has_real_root(kappa, c):
            raise NonEllipticError(f"{name}={complex(c)} makes rho^kappa - {name} vanish on the real line")
    tau1, sigma1 = complex(tau1), complex(sigma1)
    rmax = max(abs(tau1), abs(sigma1)) ** (1.0 / kappa)
    c = max(4.0 * rmax, 8.0) if cutoff is None else float(cutoff)
    if c ** kappa <= 2.0 * max(abs(tau1), abs(sigma1)):
        raise ValueError("cutoff too small for the tail expansion")

    def f(r):
        return abs(r) ** (2 * alpha) / ((r ** kappa - tau1) * (r ** kappa - sigma1))

    pts = sorted({-c, -1.0, 0.0, 1.0, c} | {x for x in (-rmax, rmax) if -c < x < c})
    core = 0j
    for lo, hi in zip(pts[:-1], pts[1:]):
        re = integrate.quad(lambda r: f(r).real, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-13)[0]
        im = integrate.quad(lambda r: f(r).imag, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-13)[0]
        core += complex(re, im)
    nterms = 400
    h = _complete_homogeneous(tau1, sigma1, nterms)
    M = max(abs(tau1), abs(sigma1))
    tail = 0j
    for n in range(nterms):
        p = 2 * alpha - (n + 2) * kappa + 1.0  # < 0
        piece = c ** p / (-p)
        sign = (-1) ** ((n + 2) * kappa)
        tail += h[n] * piece * (1 + sign)
        # |h_n| <= (n+1) M^n bounds every later term; h_n itself may vanish
        if (n + 1) * M ** n * piece < 1e-18 * max(abs(core), 1e-300):
            break
    return core + tail


def bilinear_family_symbols(kappa: int, lam: int, alpha: float, beta: float, tau1: complex, sigma1: complex):
    """``(P1, P2, Q, a)`` for the two-variable family.

    ``P1 = xi_1^kappa - tau1 xi_2^lambda`` and ``P2`` is chosen so that
    ``conj(P2(zeta)) = zeta_1^kappa - sigma1 zeta_2^lambda``; ``Q = |xi_1|^{2 alpha} |xi_2|^{2 beta}``.
    """
    a = kms_pattern(kappa, lam)
    one = np.ones((1, 1))
    P1 = MatrixPolynomial(1, 1, (((kappa, 0), one), ((0, lam), -complex(tau1) * one)), a)
    P2 = MatrixPolynomial(1, 1, (((kappa, 0), one), ((0, lam), -np.conj(complex(sigma1)) * one)), a)

    def Q(z):
        return np.abs(z[:, 0]) ** (2 * alpha) * np.abs(z[:, 1]) ** (2 * beta)

    return P1, P2, Q, a


def bilinear_family_sphere(kappa, lam, alpha, beta, tau1, sigma1, quad: SphereQuadrature) -> tuple[complex, float]:
    """Sphere integral for the family and its L1 scale ``int |integrand| dsigma``."""
    P1, P2, Q, a = bilinear_family_symbols(kappa, lam, alpha, beta, tau1, sigma1)
    value = bilinear_condition(P1, P2, Q, a, quad)
    p1 = evaluate(P1, quad.nodes)[:, 0, 0]
    p2 = evaluate(P2, quad.nodes)[:, 0, 0]
    dens = np.abs(Q(quad.nodes) * jacobian(quad.nodes, a) / (p1 * np.conj(p2)))
    return value, float(compensated_sum(quad.weights * dens))


def bilinear_family_reduced(kappa, lam, alpha, beta, tau1, sigma1) -> complex:
    """The sphere integral rebuilt from reduced integrals.

    Parametrising the upper and lower half circles by the lines
    ``xi_2 = +-1`` (flux form of the ``J dsigma`` measure) gives
    ``a_2 [I(tau1, sigma1) + I((-1)^lambda tau1, (-1)^lambda sigma1)]`` with
    ``a_2 = 2 kappa / (kappa + lambda)``; for ``lambda`` even or ``kappa`` odd
    the two halves coincide.
    """
    a2 = 2.0 * kappa / (kappa + lam)
    s = (-1) ** lam
    upper = bilinear_reduced_integral(kappa, lam, alpha, beta, tau1, sigma1)
    lower = bilinear_reduced_integral(kappa, lam, alpha, beta, s * complex(tau1), s * complex(sigma1))
    return a2 * (upper + lower)


def predicted_vanishing(kappa: int, lam: int, alpha: float, beta: float, tau1: complex, sigma1: complex) -> bool:
    """Closed-form characterisation of when the family integral vanishes."""
    return (
        (kappa % 2 == 1 or lam % 2 == 1)
        and abs(alpha - (kappa - 1) / 2) < 1e-12
        and abs(beta - (lam - 1) / 2) < 1e-12
        and complex(tau1).imag * complex(sigma1).imag > 0
    )
