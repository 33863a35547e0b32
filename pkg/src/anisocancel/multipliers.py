"""Truncated multipliers, anisotropic Riesz potentials and embedding experiments on periodic grids.

Fourier convention.  A grid of shape ``(n_1, ..., n_d)`` on the box
``prod [0, L_j)`` has frequencies ``xi_j = k_j / L_j``.  The spectrum is
``f^(xi) = cell * sum_x f(x) exp(-2 pi i x . xi)`` with ``cell = prod L_j / n_j``,
the Riemann sum of the continuous transform, and the inverse is
``f(x) = sum_xi f^(xi) exp(2 pi i x . xi) / vol``.  Symbols are pure
polynomials; a derivative ``d^k`` acts as ``(2 pi i xi)^k`` (see
:meth:`MatrixPolynomial.from_derivatives`).

Zero frequency is never inside a truncation window, so every multiplier here
maps it to zero.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np
import scipy.fft as sfft

from .bundles import kms_bundle
from .cancellation import mikhlin_cancellation_check
from .geometry import HomogeneityPattern, SphereQuadrature, compensated_sum, eta, jacobian, sphere_quadrature
from .subspace import BundleMap
from .symbols import FunctionalField, MatrixPolynomial, evaluate

__all__ = [
    "GridFunction",
    "Norms",
    "TruncationWindow",
    "Lattice",
    "UnresolvedWindowWarning",
    "ExperimentRecord",
    "lattice",
    "matched_box",
    "resolved_eta_range",
    "spectral_project_to_bundle",
    "apply_truncated_multiplier",
    "riesz_apply",
    "windowed_plancherel",
    "norms",
    "near_delta",
    "single_mode",
    "bundle_family",
    "Family",
    "log_fit",
    "plateau_variation",
    "kernel_ft_sup_experiment",
    "KernelFTResult",
    "linfty_embedding_experiment",
    "l2_embedding_experiment",
    "EmbeddingResult",
    "delta_response_experiment",
    "DeltaResponse",
    "bilinearization_check",
    "kms_bundle",
]

_CHUNK = 1 << 18


def _workers() -> int:
    """Thread count for the FFTs, from ``ANISOCANCEL_THREADS`` (default 1)."""
    raw = os.environ.get("ANISOCANCEL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class UnresolvedWindowWarning(UserWarning):
    """A truncation window reaches outside the range of ``eta`` the grid resolves."""


# --------------------------------------------------------------------------- grids


class Norms(NamedTuple):
    l1: float
    l2: float
    linf: float


class GridFunction:
    """C^l-valued samples on a periodic lattice, with a cached spectrum.

    Parameters
    ----------
    samples
        Array of shape ``(l, n_1, ..., n_d)``.  A scalar field may be passed
        with ``components=False`` as shape ``(n_1, ..., n_d)``.
    box
        Box lengths ``L_j``; a single number is used for every axis.

    Use :meth:`from_spectrum` to build a function from Fourier coefficients.
    Both representations are computed on demand and cached read-only.
    """

    def __init__(self, samples, box, components: bool = True):
        s = np.asarray(samples, dtype=complex)
        if not components:
            s = s[None]
        self._init(s.shape[1:], box, samples=s)

    def _init(self, shape, box, samples=None, spectral=None):
        shape = tuple(int(n) for n in shape)
        if len(shape) < 1 or any(n < 2 for n in shape):
            raise ValueError(f"bad grid shape {shape}")
        box = (float(box),) * len(shape) if np.isscalar(box) else tuple(float(b) for b in box)
        if len(box) != len(shape) or any(b <= 0 for b in box):
            raise ValueError("box lengths must be positive, one per axis")
        self.shape = shape
        self.box = box
        self._samples = samples
        self._spectral = spectral
        for arr in (samples, spectral):
            if arr is not None:
                arr.setflags(write=False)

    @classmethod
    def from_spectrum(cls, spectral, box, components: bool = True) -> "GridFunction":
        S = np.asarray(spectral, dtype=complex)
        if not components:
            S = S[None]
        obj = cls.__new__(cls)
        obj._init(S.shape[1:], box, spectral=S)
        return obj

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def ell(self) -> int:
        arr = self._samples if self._samples is not None else self._spectral
        return arr.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.box))

    @property
    def cell(self) -> float:
        return self.volume / float(np.prod(self.shape))

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(1, self.d + 1))

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            s = sfft.ifftn(self._spectral, axes=self.axes, workers=_workers()) / self.cell
            s.setflags(write=False)
            self._samples = s
        return self._samples

    @property
    def spectral(self) -> np.ndarray:
        if self._spectral is None:
            S = self.cell * sfft.fftn(self._samples, axes=self.axes, workers=_workers())
            S.setflags(write=False)
            self._spectral = S
        return self._spectral

    def frequencies(self) -> list[np.ndarray]:
        """Per-axis frequencies ``k / L_j`` in FFT order."""
        return [sfft.fftfreq(n, d=L / n) for n, L in zip(self.shape, self.box)]

    def norms(self) -> Norms:
        """Riemann-sum L1 and L2 norms and the max modulus (Euclidean norm on C^l)."""
        sq = np.sum(self.samples.real ** 2 + self.samples.imag ** 2, axis=0)
        mod = np.sqrt(sq)
        l1 = self.cell * float(np.sum(mod))
        l2 = math.sqrt(self.cell * float(np.sum(sq)))
        return Norms(l1, l2, float(mod.max()))

    def spectral_l2(self) -> float:
        """``(sum |f^|^2 / vol)^{1/2}``, equal to the sample-side L2 norm by Parseval."""
        S = self.spectral
        return math.sqrt(float(np.sum(S.real ** 2 + S.imag ** 2)) / self.volume)

    def component(self, j: int) -> "GridFunction":
        if self._samples is not None:
            return GridFunction(self._samples[j:j + 1], self.box)
        return GridFunction.from_spectrum(self._spectral[j:j + 1], self.box)

    def translated(self, shift: Sequence[int]) -> "GridFunction":
        """``f(x - shift * h)`` for an integer lattice shift."""
        shift = tuple(int(s) for s in shift)
        return GridFunction(np.roll(self.samples, shift, axis=self.axes), self.box)

    def dilated(self, s: float, a: HomogeneityPattern) -> "GridFunction":
        """Same samples on the box ``L_j s^{a_j}``: the exact a-dilation ``x -> Dil_{1/s} x``."""
        box = tuple(L * s ** aj for L, aj in zip(self.box, a.array))
        if self._samples is not None:
            return GridFunction(self._samples, box)
        return GridFunction(self.samples, box)

    def value_at_origin(self) -> np.ndarray:
        return np.asarray(self.samples[(slice(None),) + (0,) * self.d])

    def __repr__(self) -> str:
        return f"GridFunction(l={self.ell}, shape={self.shape}, box={self.box})"


def norms(f: GridFunction) -> Norms:
    return f.norms()


@dataclass(frozen=True)
class TruncationWindow:
    """The annulus ``eps <= eta <= R``."""

    eps: float
    R: float

    def __post_init__(self):
        if not (0 < self.eps < self.R) or not math.isfinite(self.R):
            raise ValueError(f"need 0 < eps < R, got eps={self.eps}, R={self.R}")

    @property
    def log_ratio(self) -> float:
        return math.log(self.R / self.eps)

    def contains(self, e) -> np.ndarray:
        e = np.asarray(e)
        return (e >= self.eps) & (e <= self.R)

    def to_dict(self) -> dict:
        return {"eps": self.eps, "R": self.R}


def matched_box(a: HomogeneityPattern, scale: float = 2 * math.pi) -> tuple[float, ...]:
    """Box lengths ``scale^{a_j}``; the lowest frequency on every axis then has ``eta = 1/scale``."""
    return tuple(scale ** aj for aj in a.array)


def resolved_eta_range(shape, box, a: HomogeneityPattern) -> tuple[float, float]:
    """``(lo, hi)`` such that windows inside ``[lo, hi]`` are sampled in every direction.

    ``lo`` is the largest of the lowest on-axis ``eta`` values, so the lattice
    step along each axis is at most the annulus' inner extent there.  ``hi``
    is the largest ``eta`` whose ball fits inside the frequency box.
    """
    arr = a.array
    lo = max((1.0 / L) ** (1.0 / aj) for L, aj in zip(box, arr))
    hi = min((n // 2 / L) ** (1.0 / aj) for n, L, aj in zip(shape, box, arr))
    return lo, hi


def _check_window(win: TruncationWindow, shape, box, a) -> bool:
    lo, hi = resolved_eta_range(shape, box, a)
    ok = win.eps >= lo * (1 - 1e-12) and win.R <= hi * (1 + 1e-12)
    return ok


class Lattice:
    """``eta`` of every lattice frequency for a grid and pattern.

    ``eta`` is stored in FFT order with 0 at the zero frequency; ``zeta`` is
    recomputed per slab so that big three-dimensional grids stay cheap.
    """

    def __init__(self, shape, box, a: HomogeneityPattern):
        self.shape = tuple(shape)
        self.box = tuple(box)
        self.pattern = a
        if len(self.shape) != a.d:
            raise ValueError("grid dimension and pattern dimension differ")
        self.freqs = [sfft.fftfreq(n, d=L / n) for n, L in zip(self.shape, self.box)]
        self.volume = float(np.prod(self.box))
        # eta depends on |xi_j| only: solve on the nonnegative orthant, then reflect
        half = [np.arange(n // 2 + 1) / L for n, L in zip(self.shape, self.box)]
        grids = np.meshgrid(*half, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        e = np.zeros(pts.shape[0])
        e[1:] = eta(pts[1:], a)  # the first point is the origin
        Eh = e.reshape(tuple(h.size for h in half))
        idx = [np.minimum(np.arange(n), n - np.arange(n)) for n in self.shape]
        E = Eh[np.ix_(*idx)]
        E.setflags(write=False)
        self.eta = E

    @property
    def d(self) -> int:
        return len(self.shape)

    def _rows(self) -> int:
        per = int(np.prod(self.shape[1:]))
        return max(1, _CHUNK // per)

    def _raw_slabs(self):
        rows = self._rows()
        for start in range(0, self.shape[0], rows):
            sl = slice(start, min(start + rows, self.shape[0]))
            grids = np.meshgrid(self.freqs[0][sl], *self.freqs[1:], indexing="ij")
            xi = np.stack([g.ravel() for g in grids], axis=-1)
            yield sl, xi, None

    def slabs(self, window: TruncationWindow | None = None):
        """Yield ``(slice, mask, eta, zeta)`` per slab of the first axis.

        ``mask`` selects nonzero frequencies (inside ``window`` when given) in
        the flattened slab; ``eta`` and ``zeta`` are restricted to the mask.
        """
        arr = self.pattern.array
        for sl, xi, _ in self._raw_slabs():
            e = self.eta[sl].reshape(-1)
            mask = e > 0
            if window is not None:
                mask &= window.contains(e)
            em = e[mask]
            zeta = xi[mask] * em[:, None] ** (-arr)
            zeta /= np.linalg.norm(zeta, axis=1, keepdims=True)
            yield sl, mask, em, zeta

    def sphere_field(self, fn: Callable[[np.ndarray], np.ndarray], tail: tuple[int, ...] = (),
                     dtype=complex) -> np.ndarray:
        """``fn(zeta(xi))`` at every nonzero frequency, zero at the origin; shape ``shape + tail``."""
        out = np.zeros(self.shape + tuple(tail), dtype=dtype)
        for sl, mask, _, zeta in self.slabs():
            block = np.zeros((mask.size,) + tuple(tail), dtype=dtype)
            block[mask] = np.asarray(fn(zeta)).reshape((-1,) + tuple(tail))
            out[sl] = block.reshape((-1,) + self.shape[1:] + tuple(tail))
        return out

    def inverse_power(self, p: float) -> np.ndarray:
        """``eta^{-p}`` with 0 at the origin."""
        with np.errstate(divide="ignore"):
            out = np.where(self.eta > 0, self.eta, 1.0) ** (-p)
        out[(0,) * self.d] = 0.0
        return out


@lru_cache(maxsize=4)
def _lattice_cached(shape, box, a_tuple) -> Lattice:
    return Lattice(shape, box, HomogeneityPattern(a_tuple))


def lattice(shape, box, a: HomogeneityPattern) -> Lattice:
    """Cached :class:`Lattice` for ``(shape, box, a)``."""
    return _lattice_cached(tuple(int(n) for n in shape), tuple(float(b) for b in box), tuple(a.a))


def _lattice_of(f: GridFunction, a: HomogeneityPattern) -> Lattice:
    return lattice(f.shape, f.box, a)


# --------------------------------------------------------------------------- multipliers


def _slab_view(S: np.ndarray, sl: slice) -> np.ndarray:
    """Component-major slab ``S[:, sl]`` flattened to ``(l, m)``."""
    return S[:, sl].reshape(S.shape[0], -1)


def spectral_project_to_bundle(f: GridFunction, omega: BundleMap, a: HomogeneityPattern) -> GridFunction:
    """Replace every nonzero-frequency coefficient by its projection onto ``Omega(zeta(xi))``."""
    if f.ell != omega.ambient_dim:
        raise ValueError(f"function has {f.ell} components, bundle lives in C^{omega.ambient_dim}")
    lat = _lattice_of(f, a)
    out = np.array(f.spectral)
    for sl, mask, _, zeta in lat.slabs():
        block = _slab_view(out, sl)
        vec = block[:, mask].T
        block[:, mask] = omega.project(zeta, vec).T
        out[:, sl] = block.reshape((f.ell, -1) + f.shape[1:])
    return GridFunction.from_spectrum(out, f.box)


def functional_field_on_lattice(B: FunctionalField, lat: "Lattice") -> np.ndarray:
    """Rows of ``B(zeta(xi))`` at every lattice frequency, component-first: ``(l,) + shape``."""
    ell = B.bundle.ambient_dim
    C = lat.sphere_field(B.covectors, (ell,))
    return np.moveaxis(C, -1, 0)


def apply_truncated_multiplier(
    f: GridFunction,
    B: FunctionalField,
    a: HomogeneityPattern,
    win: TruncationWindow,
    warn: bool = True,
    covectors: np.ndarray | None = None,
) -> GridFunction:
    """Multiplier with symbol ``chi_{eps <= eta <= R} eta^{-d} B(zeta)[f^(xi)]`` (scalar output).

    ``covectors`` may carry :func:`functional_field_on_lattice` for ``B`` so
    that repeated calls on one grid skip re-evaluating the functional.
    """
    if f.ell != B.bundle.ambient_dim:
        raise ValueError("functional and function have different numbers of components")
    if warn and not _check_window(win, f.shape, f.box, a):
        warnings.warn(
            f"window [{win.eps:.4g}, {win.R:.4g}] is outside the resolved range "
            f"{resolved_eta_range(f.shape, f.box, a)}", UnresolvedWindowWarning, stacklevel=2,
        )
    lat = _lattice_of(f, a)
    if covectors is None:
        d = f.d
        S = f.spectral
        out = np.zeros((1,) + f.shape, dtype=complex)
        for sl, mask, e, zeta in lat.slabs(win):
            if not np.any(mask):
                continue
            C = B.covectors(zeta)
            vals = np.einsum("nl,ln->n", C, _slab_view(S, sl)[:, mask]) * e ** (-float(d))
            block = np.zeros(mask.size, dtype=complex)
            block[mask] = vals
            out[0, sl] = block.reshape((-1,) + f.shape[1:])
        return GridFunction.from_spectrum(out, f.box)
    return _windowed(_symbol_times(f, covectors, lat), lat, win, f.box)


def _symbol_times(f: GridFunction, covectors: np.ndarray, lat: "Lattice") -> np.ndarray:
    """``eta^{-d} B(zeta)[f^]`` on the whole lattice."""
    combined = np.einsum("l...,l...->...", covectors, f.spectral)
    combined *= lat.inverse_power(f.d)
    return combined


def _windowed(combined: np.ndarray, lat: "Lattice", win: TruncationWindow, box) -> GridFunction:
    spec = np.where(win.contains(lat.eta), combined, 0.0)
    return GridFunction.from_spectrum(spec[None], box)


def riesz_apply(f: GridFunction, beta: float, a: HomogeneityPattern, win: TruncationWindow | None = None) -> GridFunction:
    """Multiply nonzero frequencies by ``eta^{-beta}`` (optionally only inside ``win``)."""
    d = f.d
    if not 0 < beta < d:
        raise ValueError(f"beta must lie in (0, {d})")
    lat = _lattice_of(f, a)
    out = np.zeros_like(f.spectral)
    S = f.spectral
    for sl, mask, e, _ in lat.slabs(win):
        block = np.zeros((f.ell, mask.size), dtype=complex)
        block[:, mask] = _slab_view(S, sl)[:, mask] * e ** (-beta)
        out[:, sl] = block.reshape((f.ell, -1) + f.shape[1:])
    return GridFunction.from_spectrum(out, f.box)


def windowed_plancherel(f: GridFunction, a: HomogeneityPattern, win: TruncationWindow) -> float:
    """``(sum_{eta in win} |f^(xi)|^2 eta^{-d} / vol)^{1/2}``: the L2 norm of the windowed ``I_{d/2} f``."""
    lat = _lattice_of(f, a)
    mask = win.contains(lat.eta)
    power = np.sum(np.abs(f.spectral[:, mask]) ** 2, axis=0) * lat.eta[mask] ** (-float(f.d))
    return math.sqrt(float(np.sum(power)) / f.volume)


# --------------------------------------------------------------------------- test functions


def near_delta(shape, box, v, fwhm_cells: float = 0.6) -> GridFunction:
    """Unit-mass Gaussian at the origin (periodic distance), times the vector ``v``.

    The default width is below one cell, so the sampled spectrum is flat to
    about 1e-3 over the whole frequency box and the function acts as a
    discrete delta.  The mean is not removed: windows never contain the zero
    frequency, and the unit mass is the total variation of ``delta_0 (x) v``.
    """
    shape = tuple(int(n) for n in shape)
    box = (float(box),) * len(shape) if np.isscalar(box) else tuple(box)
    sigma = fwhm_cells / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    g = np.ones(shape)
    for ax, n in enumerate(shape):
        k = np.arange(n)
        k = np.minimum(k, n - k).astype(float)
        prof = np.exp(-0.5 * (k / sigma) ** 2)
        g = g * prof.reshape([-1 if i == ax else 1 for i in range(len(shape))])
    cell = float(np.prod(box)) / float(np.prod(shape))
    g /= cell * g.sum()
    v = np.asarray(v, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return GridFunction((v[:, None] * g.reshape(1, -1)).reshape((v.size,) + shape), box)


def single_mode(shape, box, k, v=None) -> GridFunction:
    """``v exp(2 pi i x . xi_k)`` with ``xi_k = k / L`` (unit amplitude)."""
    shape = tuple(int(n) for n in shape)
    box = (float(box),) * len(shape) if np.isscalar(box) else tuple(box)
    v = np.ones(1, dtype=complex) if v is None else np.asarray(v, dtype=complex).reshape(-1)
    phase = np.zeros(shape)
    for ax, (n, kk) in enumerate(zip(shape, k)):
        x = np.arange(n) / n
        phase = phase + (kk * x).reshape([-1 if i == ax else 1 for i in range(len(shape))])
    mode = np.exp(2j * np.pi * phase)
    return GridFunction((v[:, None] * mode.reshape(1, -1)).reshape((v.size,) + shape), box)


def _bump(s: np.ndarray) -> np.ndarray:
    """Smooth bump of ``log2 s`` supported in ``1/2 < s < 2``."""
    u = np.log2(np.maximum(s, 1e-300))
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclass
class Family:
    """Lazily built test functions; iterate to get ``(label, GridFunction)`` pairs."""

    shape: tuple[int, ...]
    box: tuple[float, ...]
    builders: list[tuple[str, Callable[[], GridFunction]]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.builders)

    def __iter__(self) -> Iterator[tuple[str, GridFunction]]:
        for label, build in self.builders:
            yield label, build()

    @property
    def labels(self) -> list[str]:
        return [b[0] for b in self.builders]


def bundle_family(
    shape,
    box,
    omega: BundleMap,
    a: HomogeneityPattern,
    scales: Sequence[float],
    count: int = 20,
    seed: int = 0,
    symbol: MatrixPolynomial | None = None,
) -> Family:
    """Members of ``W_1^Omega`` with compact spectrum, cycling through ``scales``.

    Even members are ``f^(xi) = psi(eta/eta0) P_{Omega(zeta)} u`` with a smooth
    bump ``psi`` supported in ``eta0/2 < eta < 2 eta0`` and a random ``u``.
    Odd members are ``f^(xi) = A(zeta) c psi(eta/eta0)``, that is ``A(D) phi``
    for a suitable ``phi``, when a symbol ``A`` with ``Im A(zeta) = Omega(zeta)``
    is given; otherwise they are more projected bumps.  Every member carries a
    random lattice translation.  Spectra vanish near zero, so all means are zero.
    The bundle frames (and symbol values) on the lattice are computed once, on
    first use, and shared by all members.
    """
    shape = tuple(int(n) for n in shape)
    box = tuple(float(b) for b in box)
    if len(scales) == 0:
        raise ValueError("need at least one scale")
    rng = np.random.default_rng(seed)
    ell = omega.ambient_dim
    fam = Family(shape, box)
    cache: dict[str, np.ndarray] = {}

    def fields():
        if not cache:
            lat = lattice(shape, box, a)
            cache["frames"] = lat.sphere_field(omega.frames, (ell, omega.dim))
            if symbol is not None:
                cache["symbol"] = lat.sphere_field(lambda z: evaluate(symbol, z), (symbol.rows, symbol.cols))
        return cache

    for i in range(count):
        eta0 = float(scales[i % len(scales)])
        shift = tuple(int(rng.integers(0, n)) for n in shape)
        u = rng.standard_normal(ell) + 1j * rng.standard_normal(ell)
        use_symbol = symbol is not None and i % 2 == 1
        c = rng.standard_normal(symbol.cols) + 1j * rng.standard_normal(symbol.cols) if use_symbol else None
        label = f"{'symbol' if use_symbol else 'projected'}-bump eta0={eta0:.4g} shift={shift}"

        def build(eta0=eta0, shift=shift, u=u, c=c, use_symbol=use_symbol):
            lat = lattice(shape, box, a)
            F = fields()
            if use_symbol:
                vec = F["symbol"] @ c
            else:
                Fr = F["frames"]
                vec = np.einsum("...lk,...k->...l", Fr, np.einsum("...lk,l->...k", Fr.conj(), u))
            amp = _bump(np.where(lat.eta > 0, lat.eta, 0.0) / eta0)
            for ax, (sft, L, n) in enumerate(zip(shift, box, shape)):
                amp = amp * np.exp(-2j * np.pi * lat.freqs[ax] * (sft * L / n)).reshape(
                    [-1 if j == ax else 1 for j in range(len(shape))])
            vec *= amp[..., None]
            return GridFunction.from_spectrum(np.moveaxis(vec, -1, 0), box)

        fam.builders.append((label, build))
    return fam


# --------------------------------------------------------------------------- records and fits


@dataclass
class ExperimentRecord:
    """One row of an experiment report."""

    experiment: str
    params: dict
    window: dict | None
    value: float
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "window": self.window,
            "value": self.value,
            "flags": list(self.flags),
        }


class LinearFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def log_fit(x, y) -> LinearFit:
    """Least-squares line ``y ~ slope x + intercept`` with its coefficient of determination."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points for a fit")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r2)


def plateau_variation(values) -> float:
    """``(max - min) / max`` of positive values; 0 for a perfect plateau."""
    v = np.asarray(values, dtype=float)
    top = float(v.max())
    return (top - float(v.min())) / top if top > 0 else 0.0


# --------------------------------------------------------------------------- experiments


@dataclass
class KernelFTResult:
    windows: list[TruncationWindow]
    sups: list[float]
    at_zero: list[complex]
    flagged: list[bool]
    mikhlin_residual: complex
    mikhlin_passes: bool
    fit: LinearFit
    variation: float

    def records(self, params: dict) -> list[ExperimentRecord]:
        return [
            ExperimentRecord("kernel-ft-sup", params, w.to_dict(), s, ["unresolved-window"] if fl else [])
            for w, s, fl in zip(self.windows, self.sups, self.flagged)
        ]


def kernel_ft_sup_experiment(
    K: Callable[[np.ndarray], np.ndarray],
    a: HomogeneityPattern,
    windows: Sequence[TruncationWindow],
    shape=None,
    box=None,
    quad: SphereQuadrature | None = None,
) -> KernelFTResult:
    """Sup of ``|F[K_{eps,R}]|`` for the truncated kernel ``K(zeta) eta^{-d} chi_{[eps,R]}``.

    The kernel is sampled on the frequency lattice of a grid (``1024^d`` and
    ``2 pi`` boxes by default, anisotropic patterns use :func:`matched_box`)
    and summed against ``exp(2 pi i x . xi)`` with the lattice cell as weight,
    so the value at ``x = 0`` is the Riemann sum of ``int K_{eps,R}``.
    """
    d = a.d
    shape = (1024,) * d if shape is None else tuple(shape)
    box = matched_box(a) if box is None else tuple(box)
    quad = sphere_quadrature(d) if quad is None else quad
    residual, passes = mikhlin_cancellation_check(K, a, quad)
    lat = lattice(shape, box, a)
    sups, zeros, flagged = [], [], []
    for win in windows:
        spec = np.zeros((1,) + shape, dtype=complex)
        for sl, mask, e, zeta in lat.slabs(win):
            if not np.any(mask):
                continue
            block = np.zeros(mask.size, dtype=complex)
            block[mask] = np.asarray(K(zeta), dtype=complex) * e ** (-float(d))
            spec[0, sl] = block.reshape((-1,) + shape[1:])
        g = GridFunction.from_spectrum(spec, box)
        vals = g.samples[0]
        sups.append(float(np.abs(vals).max()))
        zeros.append(complex(vals[(0,) * d]))
        flagged.append(not _check_window(win, shape, box, a))
    logs = [w.log_ratio for w in windows]
    fit = log_fit(logs, sups) if len(windows) >= 2 else LinearFit(float("nan"), float("nan"), float("nan"))
    return KernelFTResult(list(windows), sups, zeros, flagged, residual, passes, fit, plateau_variation(sups))


@dataclass
class EmbeddingResult:
    """Ratios per family member (rows) and window (columns)."""

    experiment: str
    windows: list[TruncationWindow]
    labels: list[str]
    ratios: np.ndarray
    flagged: list[bool]
    l1_norms: list[float]

    @property
    def max_ratios(self) -> np.ndarray:
        return self.ratios.max(axis=0)

    @property
    def variation(self) -> float:
        return plateau_variation(self.max_ratios)

    def fit(self, transform: Callable[[np.ndarray], np.ndarray] = lambda x: x) -> LinearFit:
        x = transform(np.array([w.log_ratio for w in self.windows]))
        return log_fit(x, self.max_ratios)

    def records(self, params: dict) -> list[ExperimentRecord]:
        return [
            ExperimentRecord(self.experiment, params, w.to_dict(), float(m), ["unresolved-window"] if fl else [])
            for w, m, fl in zip(self.windows, self.max_ratios, self.flagged)
        ]


def _family_items(family) -> Iterator[tuple[str, GridFunction]]:
    for i, item in enumerate(family):
        if isinstance(item, GridFunction):
            yield f"member-{i}", item
        else:
            yield item


def linfty_embedding_experiment(
    omega: BundleMap,
    B: FunctionalField,
    a: HomogeneityPattern,
    family,
    windows: Sequence[TruncationWindow],
) -> EmbeddingResult:
    """``||B_{eps,R} f||_inf / ||f||_1`` for every member and window.

    ``family`` yields grid functions or ``(label, function)`` pairs; members
    are used as given, so spectra should already lie in the bundle when ``B``
    is not extended.
    """
    if B.bundle.ambient_dim != omega.ambient_dim:
        raise ValueError("functional and bundle live in different spaces")
    labels, rows, l1s = [], [], []
    flagged = None
    covectors = None
    for label, f in _family_items(family):
        lat = _lattice_of(f, a)
        if covectors is None or covectors.shape[1:] != f.shape:
            covectors = functional_field_on_lattice(B, lat)
        l1 = f.norms().l1
        combined = _symbol_times(f, covectors, lat)
        row = []
        for win in windows:
            out = _windowed(combined, lat, win, f.box)
            row.append(float(np.abs(out.samples).max()) / l1)
        if flagged is None:
            flagged = [not _check_window(w, f.shape, f.box, a) for w in windows]
        labels.append(label)
        rows.append(row)
        l1s.append(l1)
    return EmbeddingResult("embed-linf", list(windows), labels, np.array(rows), flagged or [], l1s)


def l2_embedding_experiment(
    omega: BundleMap,
    a: HomogeneityPattern,
    family,
    windows: Sequence[TruncationWindow],
) -> EmbeddingResult:
    """Windowed Plancherel ratios ``||chi I_{d/2} f||_2 / ||f||_1``."""
    labels, rows, l1s = [], [], []
    flagged = None
    for label, f in _family_items(family):
        if f.ell != omega.ambient_dim:
            raise ValueError("family member has the wrong number of components")
        l1 = f.norms().l1
        rows.append([windowed_plancherel(f, a, w) / l1 for w in windows])
        if flagged is None:
            flagged = [not _check_window(w, f.shape, f.box, a) for w in windows]
        labels.append(label)
        l1s.append(l1)
    return EmbeddingResult("embed-l2", list(windows), labels, np.array(rows), flagged or [], l1s)


@dataclass
class DeltaResponse:
    windows: list[TruncationWindow]
    measured: list[complex]
    oracle: list[complex]
    sphere_residual: complex
    flagged: list[bool]

    @property
    def relative_errors(self) -> list[float]:
        return [abs(m - o) / abs(o) if o != 0 else abs(m) for m, o in zip(self.measured, self.oracle)]


def delta_response_experiment(
    B: FunctionalField,
    a: HomogeneityPattern,
    v,
    windows: Sequence[TruncationWindow],
    shape=None,
    box=None,
    quad: SphereQuadrature | None = None,
    fwhm_cells: float = 0.6,
) -> DeltaResponse:
    """``B_{eps,R}[delta (x) v](0)`` against ``log(R/eps) int B(zeta)[v] J dsigma``."""
    d = a.d
    shape = (1024,) * d if shape is None else tuple(shape)
    box = matched_box(a) if box is None else tuple(box)
    quad = sphere_quadrature(d) if quad is None else quad
    v = np.asarray(v, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    residual = complex(compensated_sum(quad.weights * jacobian(quad.nodes, a) * B.apply(quad.nodes, v)))
    f = near_delta(shape, box, v, fwhm_cells)
    measured, oracle, flagged = [], [], []
    for win in windows:
        out = apply_truncated_multiplier(f, B, a, win, warn=False)
        measured.append(complex(out.value_at_origin()[0]))
        oracle.append(win.log_ratio * residual)
        flagged.append(not _check_window(win, shape, box, a))
    return DeltaResponse(list(windows), measured, oracle, residual, flagged)


def bilinearization_check(f: GridFunction, g: GridFunction, a: HomogeneityPattern, win: TruncationWindow) -> tuple[float, float]:
    """Both sides of ``|sum_xi eta^{-d} <f^, g^> / vol| <= sum_j ||B_j f||_inf ||g_j||_1``.

    ``B_j`` is the truncated multiplier of the coordinate functional ``e_j``,
    so the left side equals ``sum_j int B_j f conj(g_j)`` by Parseval.  Each
    side is computed independently: the left one on frequencies, the right
    one from samples.
    """
    if f.shape != g.shape or f.box != g.box or f.ell != g.ell:
        raise ValueError("f and g must live on the same grid")
    lat = _lattice_of(f, a)
    Sf, Sg = f.spectral, g.spectral
    parts = []
    for sl, mask, e, _ in lat.slabs(win):
        if np.any(mask):
            pair = np.sum(_slab_view(Sf, sl)[:, mask] * np.conj(_slab_view(Sg, sl)[:, mask]), axis=0)
            parts.append(complex(compensated_sum(pair * e ** (-float(f.d)))))
    lhs = abs(complex(compensated_sum(np.array(parts, dtype=complex)))) / f.volume if parts else 0.0
    rhs = 0.0
    for j in range(f.ell):
        Bj = _coordinate_multiplier_samples(f, j, a, win)
        rhs += float(np.abs(Bj).max()) * g.cell * float(np.sum(np.abs(g.samples[j])))
    return lhs, rhs


def _coordinate_multiplier_samples(f: GridFunction, j: int, a: HomogeneityPattern, win: TruncationWindow) -> np.ndarray:
    """Samples of the truncated multiplier ``chi eta^{-d}`` applied to component ``j``."""
    lat = _lattice_of(f, a)
    S = f.spectral
    out = np.zeros(f.shape, dtype=complex)
    for sl, mask, e, _ in lat.slabs(win):
        block = np.zeros(mask.size, dtype=complex)
        block[mask] = S[j, sl].reshape(-1)[mask] * e ** (-float(f.d))
        out[sl] = block.reshape((-1,) + f.shape[1:])
    return sfft.ifftn(out, workers=_workers()) / f.cell
