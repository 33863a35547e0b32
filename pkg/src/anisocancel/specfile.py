"""Text format for operator specifications.

Grammar (one directive per line, ``#`` starts a comment)::

    dim <d>
    pattern <a_1> ... <a_d>            reals or fractions such as 3/4
    spaces <l> <k>                     fibre dimension k inside C^l
    order <m>                          optional; inferred from the terms
    term <k_1> ... <k_d> : <matrix>    coefficient of xi^k in A (l x k)
    pterm <k_1> ... <k_d> : <row>      coefficient of xi^k in P (1 x k)
    constant : <matrix>                constant bundle spanned by the columns (l x k)
    sample <z_1> ... <z_d> : <matrix>  bundle sample at a sphere point (l x k)
    builtin <name> [key=value ...]     gn3 | kms kappa= lambda= N= | gradient d=

``<matrix>`` lists rows separated by ``;`` with entries separated by spaces
or commas.  Entries are real or complex numbers written ``2``, ``-0.5``,
``3i``, ``1+2i`` or ``1.5e-3-2i`` (``j`` is accepted for ``i``).

Symbols are pure polynomials in ``xi``; no ``2 pi i`` factors are implied.

A file describes exactly one source: a ``builtin`` line, symbol ``term``
lines, a ``constant`` line, or ``sample`` lines.  A ``builtin`` may be
combined with header lines only if they agree with it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .bundles import constant_bundle, gn_bundle, gn_pattern, kms_bundle, sampled_bundle
from .geometry import HomogeneityPattern
from .subspace import BundleMap
from .symbols import MatrixPolynomial, image_bundle

__all__ = ["SpecError", "OperatorSpec", "parse_spec", "serialize_spec", "load_spec", "BUILTINS"]


class SpecError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


Matrix = tuple[tuple[complex, ...], ...]

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX = re.compile(
    rf"^(?:(?P<re>{_NUMBER})(?P<im>[+-](?:\d+\.?\d*|\.\d+)?(?:[eE][+-]?\d+)?)[ij]"
    rf"|(?P<pure>[+-]?(?:\d+\.?\d*|\.\d+)?(?:[eE][+-]?\d+)?)[ij]"
    rf"|(?P<real>{_NUMBER}))$"
)
_ALIASES = {"κ": "kappa", "λ": "lambda", "lam": "lambda"}


def _imag_part(text: str) -> float:
    if text in ("", "+"):
        return 1.0
    if text == "-":
        return -1.0
    return float(text)


def parse_complex(token: str) -> complex:
    m = _COMPLEX.match(token)
    if not m:
        raise ValueError(f"not a number: {token!r}")
    if m.group("real") is not None:
        return complex(float(m.group("real")), 0.0)
    if m.group("pure") is not None:
        return complex(0.0, _imag_part(m.group("pure")))
    return complex(float(m.group("re")), _imag_part(m.group("im")))


def format_complex(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return repr(z.real + 0.0)
    if z.real == 0:
        return f"{z.imag!r}i"
    sign = "-" if z.imag < 0 else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def _real(token: str) -> float:
    return float(Fraction(token))


@dataclass(frozen=True)
class OperatorSpec:
    """Parsed operator specification (see the module docstring for the format)."""

    dim: int
    pattern: tuple[float, ...]
    ell: int
    k: int
    kind: str  # builtin | symbol | constant | sampled
    builtin: str | None = None
    params: tuple[tuple[str, int], ...] = ()
    order: float | None = None
    terms: tuple[tuple[tuple[int, ...], Matrix], ...] = ()
    pterms: tuple[tuple[tuple[int, ...], Matrix], ...] = ()
    constant: Matrix | None = None
    samples: tuple[tuple[tuple[float, ...], Matrix], ...] = ()

    @property
    def homogeneity(self) -> HomogeneityPattern:
        return HomogeneityPattern(self.pattern)

    def symbol(self) -> MatrixPolynomial | None:
        if self.kind == "builtin":
            return _builtin_symbol(self.builtin, dict(self.params))
        if self.kind != "symbol":
            return None
        return MatrixPolynomial(self.ell, self.k, tuple((kk, np.array(C)) for kk, C in self.terms),
                                self.homogeneity, self.order)

    def p_symbol(self) -> MatrixPolynomial | None:
        if not self.pterms:
            return None
        return MatrixPolynomial(1, self.k, tuple((kk, np.array(C)) for kk, C in self.pterms), self.homogeneity)

    def bundle(self, quad=None) -> BundleMap:
        """The bundle this spec describes (ellipticity is checked on ``quad`` for symbols)."""
        if self.kind == "builtin":
            p = dict(self.params)
            if self.builtin == "kms":
                return kms_bundle(p["kappa"], p["lambda"], p["N"])[0]
            if self.builtin == "gn3":
                return gn_bundle()
            return image_bundle(self.symbol(), quad)
        if self.kind == "symbol":
            return image_bundle(self.symbol(), quad)
        if self.kind == "constant":
            return constant_bundle(np.array(self.constant), self.dim)
        return sampled_bundle([z for z, _ in self.samples], [np.array(M) for _, M in self.samples])


def _builtin_header(name: str, params: dict, pos) -> tuple[int, tuple[float, ...], int, int]:
    if name == "gn3":
        if params:
            raise SpecError("builtin gn3 takes no parameters", *pos)
        return 3, gn_pattern().a, 2, 1
    if name == "kms":
        missing = {"kappa", "lambda", "N"} - params.keys()
        if missing or len(params) != 3:
            raise SpecError("builtin kms needs exactly kappa=, lambda= and N=", *pos)
        _, pat = kms_bundle(params["kappa"], params["lambda"], params["N"])
        return 2, pat.a, params["N"] + 1, params["N"]
    if name == "gradient":
        if set(params) - {"d"}:
            raise SpecError("builtin gradient takes only d=", *pos)
        d = params.get("d", 2)
        if d < 2:
            raise SpecError("gradient needs d >= 2", *pos)
        return d, (1.0,) * d, d, 1
    raise SpecError(f"unknown builtin {name!r} (known: {', '.join(BUILTINS)})", *pos)


def _builtin_symbol(name: str, params: dict) -> MatrixPolynomial | None:
    if name == "gn3":
        # (xi_1 ; xi_2^2 + xi_3^2) acting on a scalar
        top, bottom = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
        return MatrixPolynomial(2, 1, (((1, 0, 0), top), ((0, 2, 0), bottom), ((0, 0, 2), bottom)),
                                gn_pattern())
    if name == "gradient":
        d = params.get("d", 2)
        terms = []
        for j in range(d):
            k = [0] * d
            k[j] = 1
            C = np.zeros((d, 1))
            C[j, 0] = 1.0
            terms.append((tuple(k), C))
        return MatrixPolynomial(d, 1, tuple(terms), HomogeneityPattern.isotropic(d))
    return None


BUILTINS = ("gn3", "kms", "gradient")


def _split_matrix(text: str, lineno: int, col: int) -> Matrix:
    rows = []
    offset = col
    for chunk in text.split(";"):
        entries = chunk.replace(",", " ").split()
        if not entries:
            raise SpecError("empty matrix row", lineno, offset)
        row = []
        for tok in entries:
            try:
                row.append(parse_complex(tok))
            except ValueError:
                raise SpecError(f"bad matrix entry {tok!r}", lineno, offset + chunk.find(tok)) from None
        rows.append(tuple(row))
        offset += len(chunk) + 1
    if len({len(r) for r in rows}) != 1:
        raise SpecError("matrix rows have different lengths", lineno, col)
    return tuple(rows)


def _ints(tokens, lineno, col, what):
    out = []
    for t in tokens:
        try:
            v = int(t)
        except ValueError:
            raise SpecError(f"{what} must be integers, got {t!r}", lineno, col) from None
        out.append(v)
    return out


def parse_spec(text: str) -> OperatorSpec:
    """Parse and validate an operator specification."""
    header: dict = {}
    terms, pterms, samples = [], [], []
    constant = None
    builtin = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col0 = len(line) - len(line.lstrip()) + 1
        head, _, rest = line.strip().partition(" ")
        rest = rest.strip()
        pos = (lineno, col0)
        if head in ("dim", "order", "pattern", "spaces"):
            if head in header:
                raise SpecError(f"duplicate {head!r} line", *pos)
            toks = rest.split()
            try:
                if head == "dim":
                    if len(toks) != 1:
                        raise SpecError("dim takes one integer", *pos)
                    header["dim"] = _ints(toks, *pos, "dim")[0]
                elif head == "order":
                    if len(toks) != 1:
                        raise SpecError("order takes one number", *pos)
                    header["order"] = _real(toks[0])
                elif head == "pattern":
                    header["pattern"] = tuple(_real(t) for t in toks)
                else:
                    if len(toks) != 2:
                        raise SpecError("spaces takes two integers: l k", *pos)
                    header["spaces"] = tuple(_ints(toks, *pos, "spaces"))
            except (ValueError, ZeroDivisionError) as exc:
                if isinstance(exc, SpecError):
                    raise
                raise SpecError(f"malformed {head} line: {exc}", *pos) from None
            continue
        if head in ("term", "pterm", "sample", "constant"):
            if ":" not in rest and head != "constant":
                raise SpecError(f"{head} line needs ' : ' before the matrix", *pos)
            left, _, right = rest.partition(":")
            if head == "constant" and left.strip():
                raise SpecError("constant takes no arguments before ':'", *pos)
            mcol = line.index(":") + 2
            M = _split_matrix(right, lineno, mcol)
            if head == "sample":
                try:
                    z = tuple(float(t) for t in left.split())
                except ValueError:
                    raise SpecError("sample point coordinates must be reals", *pos) from None
                samples.append((z, M, lineno))
            elif head == "constant":
                if constant is not None:
                    raise SpecError("duplicate constant line", *pos)
                constant = (M, lineno)
            else:
                k = tuple(_ints(left.split(), lineno, col0, "exponents"))
                (terms if head == "term" else pterms).append((k, M, lineno))
            continue
        if head == "builtin":
            if builtin is not None:
                raise SpecError("only one builtin line is allowed", *pos)
            toks = rest.split()
            if not toks:
                raise SpecError("builtin needs a name", *pos)
            params = {}
            for t in toks[1:]:
                key, eq, val = t.partition("=")
                if not eq:
                    raise SpecError(f"expected key=value, got {t!r}", *pos)
                key = _ALIASES.get(key, key)
                try:
                    params[key] = int(val)
                except ValueError:
                    raise SpecError(f"parameter {key} must be an integer", *pos) from None
            builtin = (toks[0], params, pos)
            continue
        raise SpecError(f"unknown directive {head!r}", *pos)

    sources = sum([builtin is not None, bool(terms), constant is not None, bool(samples)])
    if sources != 1:
        raise SpecError("a spec needs exactly one source: builtin, term lines, constant, or sample lines")
    if pterms and not terms and builtin is None:
        raise SpecError("pterm lines need a symbol (term lines or a builtin)")

    if builtin is not None:
        name, params, pos = builtin
        d, pat, ell, k = _builtin_header(name, params, pos)
        given = {"dim": d, "spaces": (ell, k)}
        for key, val in given.items():
            if key in header and header[key] != val:
                raise SpecError(f"{key} line disagrees with builtin {name}")
        if "pattern" in header and not np.allclose(HomogeneityPattern(header["pattern"]).a, pat, atol=1e-12):
            raise SpecError(f"pattern line disagrees with builtin {name}")
        spec = OperatorSpec(d, tuple(pat), ell, k, "builtin", builtin=name,
                            params=tuple(sorted(params.items())))
        if pterms:
            spec = replace(spec, pterms=_validate_terms(pterms, d, 1, k, spec.homogeneity, None, "pterm"))
        return spec

    for key in ("dim", "pattern", "spaces"):
        if key not in header:
            raise SpecError(f"missing {key!r} line")
    d = header["dim"]
    if len(header["pattern"]) != d:
        raise SpecError(f"pattern has {len(header['pattern'])} entries but dim is {d}")
    try:
        pattern = HomogeneityPattern(header["pattern"])
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    ell, k = header["spaces"]
    if not (0 <= k <= ell and ell >= 1):
        raise SpecError("spaces needs 0 <= k <= l and l >= 1")
    base = OperatorSpec(d, pattern.a, ell, k, "symbol")
    if terms:
        vt = _validate_terms(terms, d, ell, k, pattern, header.get("order"), "term")
        order = header.get("order")
        if order is None:
            order = float(np.dot(pattern.array, vt[0][0]))
        spec = replace(base, terms=vt, order=float(order))
        if pterms:
            spec = replace(spec, pterms=_validate_terms(pterms, d, 1, k, pattern, None, "pterm"))
        return spec
    if "order" in header:
        raise SpecError("order applies only to symbol specs")
    if constant is not None:
        M, lineno = constant
        _check_shape(M, ell, k, lineno)
        return replace(base, kind="constant", constant=M)
    out = []
    for z, M, lineno in samples:
        if len(z) != d:
            raise SpecError(f"sample point has {len(z)} coordinates, expected {d}", lineno)
        if abs(np.linalg.norm(z) - 1.0) > 1e-8:
            raise SpecError("sample points must lie on the unit sphere", lineno)
        _check_shape(M, ell, k, lineno)
        out.append((z, M))
    return replace(base, kind="sampled", samples=tuple(out))


def _check_shape(M: Matrix, rows: int, cols: int, lineno: int):
    if len(M) != rows or len(M[0]) != cols:
        raise SpecError(f"matrix is {len(M)}x{len(M[0])}, expected {rows}x{cols}", lineno)


def _validate_terms(raw, d, rows, cols, pattern, order, what):
    out = []
    m = order
    for kk, M, lineno in raw:
        if len(kk) != d:
            raise SpecError(f"{what} has {len(kk)} exponents, expected {d}", lineno)
        if any(x < 0 for x in kk):
            raise SpecError(f"{what} exponents must be nonnegative", lineno)
        _check_shape(M, rows, cols, lineno)
        o = float(np.dot(pattern.array, kk))
        if m is None:
            m = o
        elif abs(o - m) > 1e-12:
            raise SpecError(f"{what} {kk} has order {o:g}, expected {m:g} (terms must be a-homogeneous)", lineno)
        out.append((kk, M))
    return tuple(out)


def _fmt_matrix(M: Matrix) -> str:
    return " ; ".join(" ".join(format_complex(z) for z in row) for row in M)


def serialize_spec(spec: OperatorSpec) -> str:
    """Canonical text; ``parse_spec(serialize_spec(s)) == s``."""
    lines = []
    if spec.kind == "builtin":
        params = " ".join(f"{k}={v}" for k, v in spec.params)
        lines.append(f"builtin {spec.builtin}" + (f" {params}" if params else ""))
    else:
        lines.append(f"dim {spec.dim}")
        lines.append("pattern " + " ".join(repr(x) for x in spec.pattern))
        lines.append(f"spaces {spec.ell} {spec.k}")
        if spec.kind == "symbol":
            lines.append(f"order {spec.order!r}")
            for kk, M in spec.terms:
                lines.append("term " + " ".join(map(str, kk)) + " : " + _fmt_matrix(M))
        elif spec.kind == "constant":
            lines.append("constant : " + _fmt_matrix(spec.constant))
        else:
            for z, M in spec.samples:
                lines.append("sample " + " ".join(repr(x) for x in z) + " : " + _fmt_matrix(M))
    for kk, M in spec.pterms:
        lines.append("pterm " + " ".join(map(str, kk)) + " : " + _fmt_matrix(M))
    return "\n".join(lines) + "\n"


def load_spec(path_or_builtin: str) -> OperatorSpec:
    """Read a spec file, or expand ``"gn3"`` / ``"kms kappa=1 lambda=1 N=1"`` as a builtin."""
    name = path_or_builtin.split()[0] if path_or_builtin.strip() else ""
    if name in BUILTINS:
        return parse_spec("builtin " + path_or_builtin)
    with open(path_or_builtin, encoding="utf-8") as fh:
        return parse_spec(fh.read())
