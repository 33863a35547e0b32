"""Matrix-valued polynomial symbols and the functionals built from them.

Symbols are plain polynomials in ``xi``: the coefficient stored for the
multi-index ``k`` multiplies ``xi^k``.  The factor ``(2 pi i)^{|k|}`` that turns
a derivative ``d^k`` into its symbol under ``exp(-2 pi i x.xi)`` is applied
only by :meth:`MatrixPolynomial.from_derivatives`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .geometry import HomogeneityPattern, SphereQuadrature
from .subspace import BundleMap

__all__ = [
    "MatrixPolynomial",
    "FunctionalField",
    "EllipticityReport",
    "NonEllipticError",
    "evaluate",
    "ellipticity_check",
    "image_bundle",
    "functional_from_operator",
    "coordinate_functional",
    "constant_functional",
]


class NonEllipticError(ValueError):
    """Symbol loses rank on the sphere; ``node`` is the worst sample point."""

    def __init__(self, message: str, node=None, min_singular_value: float | None = None):
        super().__init__(message)
        self.node = None if node is None else np.asarray(node)
        self.min_singular_value = min_singular_value


@dataclass(frozen=True, eq=False)
class MatrixPolynomial:
    """``A(xi) = sum_k C_k xi^k`` with ``rows x cols`` complex coefficients.

    Every multi-index must satisfy ``sum_j a_j k_j == order`` (to 1e-12), so the
    symbol is a-homogeneous: ``A(Dil_t xi) = t^{-order} A(xi)``.  ``order`` is
    inferred from the first term when omitted.
    """

    rows: int
    cols: int
    terms: tuple[tuple[tuple[int, ...], np.ndarray], ...]
    pattern: HomogeneityPattern
    order: float | None = None

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a matrix polynomial needs at least one term")
        a = self.pattern.array
        clean = []
        for k, C in self.terms:
            k = tuple(int(x) for x in k)
            if len(k) != self.pattern.d or any(x < 0 for x in k):
                raise ValueError(f"bad multi-index {k} for dimension {self.pattern.d}")
            C = np.array(C, dtype=complex).reshape(self.rows, self.cols)
            C.setflags(write=False)
            clean.append((k, C))
        orders = [float(np.dot(a, k)) for k, _ in clean]
        m = orders[0] if self.order is None else float(self.order)
        bad = [k for (k, _), o in zip(clean, orders) if abs(o - m) > 1e-12]
        if bad:
            raise ValueError(f"terms {bad} are not a-homogeneous of order {m}")
        object.__setattr__(self, "terms", tuple(clean))
        object.__setattr__(self, "order", m)

    @classmethod
    def from_derivatives(cls, rows, cols, terms, pattern, order=None) -> "MatrixPolynomial":
        """Build the symbol of ``sum_k C_k d^k`` using ``d_j <-> 2 pi i xi_j``."""
        conv = [(k, np.asarray(C, dtype=complex) * (2j * np.pi) ** sum(k)) for k, C in terms]
        return cls(rows, cols, tuple(conv), pattern, order)

    @property
    def d(self) -> int:
        return self.pattern.d

    def __call__(self, xi) -> np.ndarray:
        return evaluate(self, xi)

    def adjoint_at(self, xi) -> np.ndarray:
        return np.conj(np.swapaxes(evaluate(self, xi), -1, -2))


def evaluate(A: MatrixPolynomial, xi) -> np.ndarray:
    """``A(xi)``; a stack of points ``(n, d)`` gives ``(n, rows, cols)``."""
    x = np.asarray(xi, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    out = np.zeros((X.shape[0], A.rows, A.cols), dtype=complex)
    for k, C in A.terms:
        mono = np.ones(X.shape[0])
        for j, kj in enumerate(k):
            if kj:
                mono = mono * X[:, j] ** kj
        out += mono[:, None, None] * C
    return out[0] if single else out


class EllipticityReport(NamedTuple):
    is_elliptic: bool
    min_singular_value: float
    argmin_node: np.ndarray


def ellipticity_check(A: MatrixPolynomial, quad: SphereQuadrature | np.ndarray, tol: float = 1e-8) -> EllipticityReport:
    """Smallest singular value of ``A(zeta)`` over the quadrature nodes."""
    if A.rows < A.cols:
        raise ValueError("ellipticity needs rows >= cols")
    nodes = quad.nodes if isinstance(quad, SphereQuadrature) else np.atleast_2d(quad)
    s = np.linalg.svd(evaluate(A, nodes), compute_uv=False)[:, -1]
    i = int(np.argmin(s))
    return EllipticityReport(bool(s[i] > tol), float(s[i]), nodes[i].copy())


def image_bundle(A: MatrixPolynomial, quad: SphereQuadrature | None = None, tol: float = 1e-8) -> BundleMap:
    """``zeta -> Im A(zeta)``, checked for ellipticity on ``quad`` when given."""
    if quad is not None:
        rep = ellipticity_check(A, quad, tol)
        if not rep.is_elliptic:
            raise NonEllipticError(
                f"symbol is not elliptic: min singular value {rep.min_singular_value:.3g} "
                f"at zeta={rep.argmin_node.tolist()}",
                rep.argmin_node, rep.min_singular_value,
            )
    return BundleMap(lambda z: evaluate(A, z), A.d, A.rows, A.cols, kind="image-of-symbol",
                     name="image")


class FunctionalField:
    """Field of linear functionals ``B(zeta)`` on the fibres of a bundle.

    ``covector_fn`` maps unit vectors ``(n, d)`` to rows ``(n, l)``.  Unless the
    field is ``extended`` the rows are composed with ``P_{Omega(zeta)}``, so
    only the restriction to ``Omega(zeta)`` matters.  An extended field is a
    functional on all of ``C^l`` and is used as given.
    """

    def __init__(self, covector_fn: Callable[[np.ndarray], np.ndarray], bundle: BundleMap,
                 extended: bool = False, name: str = ""):
        self._fn = covector_fn
        self.bundle = bundle
        self.extended = extended
        self.name = name

    def raw(self, zetas) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(zetas, dtype=float))
        return np.asarray(self._fn(Z), dtype=complex).reshape(Z.shape[0], self.bundle.ambient_dim)

    def covectors(self, zetas) -> np.ndarray:
        """Rows representing ``B(zeta)`` (composed with the fibre projection when not extended)."""
        Z = np.atleast_2d(np.asarray(zetas, dtype=float))
        rows = self.raw(Z)
        if self.extended:
            return rows
        P = self.bundle.projectors(Z)
        return np.einsum("nl,nlm->nm", rows, P)

    def apply(self, zetas, vectors) -> np.ndarray:
        """``B(zeta_i)[v_i]`` for ``vectors`` of shape ``(n, l)`` or a single ``(l,)``."""
        C = self.covectors(zetas)
        v = np.asarray(vectors, dtype=complex)
        if v.ndim == 1:
            return C @ v
        return np.einsum("nl,nl->n", C, v)

    def __call__(self, zeta) -> np.ndarray:
        return self.covectors(np.asarray(zeta, dtype=float)[None, :])[0]

    def __repr__(self) -> str:
        tag = "extended " if self.extended else ""
        return f"FunctionalField({tag}{self.name or 'B'} on {self.bundle!r})"


def coordinate_functional(bundle: BundleMap, j: int) -> FunctionalField:
    """``B(zeta)[v] = v_j`` on ``Omega(zeta)``."""
    row = np.zeros(bundle.ambient_dim, dtype=complex)
    row[j] = 1.0
    return constant_functional(bundle, row, name=f"coord{j}")


def constant_functional(bundle: BundleMap, row, name: str = "constant") -> FunctionalField:
    row = np.asarray(row, dtype=complex)
    return FunctionalField(lambda z: np.broadcast_to(row, (z.shape[0], row.size)), bundle, name=name)


def functional_from_operator(A: MatrixPolynomial, P: MatrixPolynomial, quad: SphereQuadrature | None = None,
                             tol: float = 1e-8) -> FunctionalField:
    """``B(zeta) = P(zeta) (A* A)^{-1} A*(zeta)`` on ``Omega = Im A``.

    With ``A = QR`` this is ``P R^{-1} Q*``, so no normal equations are
    formed.  ``P`` must be a single row acting on the domain of ``A``.
    """
    if P.rows != 1 or P.cols != A.cols:
        raise ValueError("P must be a 1 x cols(A) symbol")
    if P.pattern != A.pattern:
        raise ValueError("A and P use different homogeneity patterns")
    bundle = image_bundle(A, quad, tol)

    def rows(z):
        Q, R = np.linalg.qr(evaluate(A, z))
        diag = np.abs(np.diagonal(R, axis1=-2, axis2=-1)).min(axis=-1)
        if np.any(diag <= tol):
            i = int(np.argmin(diag))
            raise NonEllipticError("A*A is singular at a sphere point", z[i], float(diag[i]))
        Pz = evaluate(P, z)  # (n, 1, cols)
        # X = P R^{-1}  <=>  R^T X^T = P^T
        X = np.linalg.solve(np.swapaxes(R, -1, -2), np.swapaxes(Pz, -1, -2))
        return np.einsum("nk,nlk->nl", X[:, :, 0], Q.conj())

    return FunctionalField(rows, bundle, extended=False, name="P(A*A)^-1A*")
