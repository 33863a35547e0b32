"""Command-line front end.

Exit codes: 0 check passed or experiment finished without flags, 1 check
failed, 2 usage or parse error, 3 numerical ill-conditioning or flagged
experiment.  ``--format json`` reports follow ``report.schema.json`` shipped
with the package; they contain no timestamps, so a fixed configuration and
seed give byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Sequence

import numpy as np

from . import cancellation, multipliers
from .geometry import HomogeneityPattern, graded_circle_quadrature, sphere_quadrature
from .specfile import BUILTINS, OperatorSpec, SpecError, load_spec, parse_complex
from .symbols import FunctionalField, NonEllipticError, coordinate_functional, functional_from_operator

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
_STATUS = {EXIT_PASS: "passed", EXIT_FAIL: "failed", EXIT_USAGE: "error", EXIT_NUMERIC: "ill-conditioned"}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------- helpers


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _fmt(x: Any) -> str:
    if isinstance(x, bool) or x is None:
        return str(x).lower() if isinstance(x, bool) else "null"
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, list):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    if isinstance(x, dict):
        return "{" + ", ".join(f"{k}: {_fmt(v)}" for k, v in sorted(x.items())) + "}"
    return str(x)


def _render_text(report: dict) -> str:
    lines = [f"{report['command']}: {report['status']} (exit {report['exit_code']})"]
    if report.get("reason"):
        lines.append(f"reason: {report['reason']}")
    for key, value in sorted(report.get("result", {}).items()):
        lines.append(f"{key}: {_fmt(value)}")
    for rec in report.get("records", []):
        w = rec.get("window")
        where = f"[{_fmt(w['eps'])}, {_fmt(w['R'])}]" if w else "-"
        flags = ",".join(rec["flags"]) or "-"
        lines.append(f"  {rec['experiment']} window={where} value={_fmt(rec['value'])} flags={flags}")
    return "\n".join(lines) + "\n"


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"expected numbers, got {text!r}") from None


def _parse_grid(text: str) -> tuple[int, ...]:
    try:
        shape = tuple(int(t) for t in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"grid must look like 1024x1024, got {text!r}") from None
    if any(n < 8 for n in shape):
        raise UsageError("every grid axis needs at least 8 points")
    return shape


def _load(args) -> OperatorSpec:
    if bool(args.spec) == bool(args.builtin):
        raise UsageError("give exactly one of --spec and --builtin")
    source = args.builtin if args.builtin else args.spec
    if args.builtin and source.split()[0] not in BUILTINS:
        raise UsageError(f"unknown builtin {source.split()[0]!r} (known: {', '.join(BUILTINS)})")
    return load_spec(source)


def _quadrature(d: int, n: int | None):
    return sphere_quadrature(d, n)


def _functional(name: str | None, spec: OperatorSpec, omega, quad) -> FunctionalField:
    if name is None or name == "first-coord":
        return coordinate_functional(omega, 0)
    if name.startswith("coord:"):
        j = int(name.split(":", 1)[1])
        if not 0 <= j < omega.ambient_dim:
            raise UsageError(f"coordinate {j} out of range for C^{omega.ambient_dim}")
        return coordinate_functional(omega, j)
    if name.startswith("zeta:"):
        j = int(name.split(":", 1)[1])
        if not 0 <= j < omega.d:
            raise UsageError(f"sphere coordinate {j} out of range for d={omega.d}")
        ell = omega.ambient_dim

        def rows(z, j=j):
            out = np.zeros((z.shape[0], ell), dtype=complex)
            out[:, 0] = z[:, j]
            return out

        return FunctionalField(rows, omega, name=f"zeta{j}*v0")
    if name == "p-symbol":
        A, P = spec.symbol(), spec.p_symbol()
        if A is None or P is None:
            raise UsageError("--functional p-symbol needs a spec with term and pterm lines")
        return functional_from_operator(A, P, quad)
    raise UsageError(f"unknown functional {name!r}")


def _windows(spec_pattern: HomogeneityPattern, shape, box, eps_factor, ratios):
    lo, hi = multipliers.resolved_eta_range(shape, box, spec_pattern)
    eps = eps_factor * lo
    return [multipliers.TruncationWindow(eps, eps * r) for r in ratios], lo, hi


# --------------------------------------------------------------------------- commands


def cmd_check(args) -> tuple[int, dict, list, str | None]:
    spec = _load(args)
    a = spec.homogeneity
    quad = _quadrature(a.d, args.quad)
    omega = spec.bundle(quad)
    if args.functional in (None, "none"):
        rep = cancellation.canceling_check(omega, quad, args.tol)
        code = EXIT_PASS if rep.is_canceling else EXIT_FAIL
        reason = None if rep.is_canceling else f"fibres share a subspace of dimension {rep.v_dim}"
    else:
        B = _functional(args.functional, spec, omega, quad)
        rep = cancellation.weak_cancellation_check(B, omega, a, quad, args.tol)
        code = EXIT_PASS if rep.is_weakly_canceling else EXIT_FAIL
        reason = None if rep.is_weakly_canceling else "weak cancellation residual is nonzero"
    if code == EXIT_PASS and (rep.ill_conditioned or not rep.refinement_stable):
        code, reason = EXIT_NUMERIC, "intersection dimension is ill-conditioned or unstable under refinement"
    result = rep.to_dict()
    result["V_basis"] = [[complex(z) for z in col] for col in rep.V.frame.T]
    result["pattern"] = list(a.a)
    result["bundle"] = omega.name or omega.kind
    return code, result, [], reason


def cmd_extend(args):
    spec = _load(args)
    a = spec.homogeneity
    quad = _quadrature(a.d, args.quad)
    omega = spec.bundle(quad)
    B = _functional(args.functional, spec, omega, quad)
    try:
        ext = cancellation.extend_functional(B, omega, a, quad, args.basis_size, args.tol)
    except cancellation.ExtensionError as exc:
        code = EXIT_NUMERIC if "basis too small" in str(exc) else EXIT_FAIL
        return code, {"pattern": list(a.a)}, [], str(exc)
    fine = quad.refined()
    residual = cancellation.total_cancellation_residual(ext, a, fine)
    P = omega.projectors(quad.nodes)
    restr = np.einsum("nl,nlm->nm", ext.covectors(quad.nodes), P) - B.covectors(quad.nodes)
    result = {
        "pattern": list(a.a),
        "basis_size": args.basis_size,
        "total_cancellation_residual": residual,
        "restriction_error": float(np.abs(restr).max()),
        "coefficients": [[complex(z) for z in row] for row in ext.coefficients],
    }
    ok = residual < args.tol
    return (EXIT_PASS if ok else EXIT_NUMERIC), result, [], None if ok else "residual above tolerance"


_KERNELS = {
    "one": lambda z: np.ones(z.shape[0]),
    "zeta1": lambda z: z[:, 0],
    "zeta1zeta2": lambda z: z[:, 0] * z[:, 1],
    "sign1": lambda z: np.sign(z[:, 0]),
}


def cmd_mikhlin(args):
    a = HomogeneityPattern.parse(args.pattern) if args.pattern else HomogeneityPattern.isotropic(2)
    K = _KERNELS[args.kernel]
    quad = _quadrature(a.d, args.quad)
    residual, passes = cancellation.mikhlin_cancellation_check(K, a, quad, args.tol)
    scales = np.geomspace(1.0, 1e-3, 16)
    dm = cancellation.dini_modulus(K, scales, d=a.d, seed=args.seed)
    result = {
        "pattern": list(a.a),
        "kernel": args.kernel,
        "residual": complex(residual),
        "passes": passes,
        "dini_sum": dm.dini_sum,
        "dini_modulus": dm.modulus,
        "dini_scales": dm.scales,
    }
    records = []
    code = EXIT_PASS if passes else EXIT_FAIL
    reason = None if passes else "kernel has nonzero weighted sphere mean"
    if args.experiment:
        shape = _parse_grid(args.grid) if args.grid else (1024,) * a.d
        box = multipliers.matched_box(a)
        eps_factor = args.eps_factor if args.eps_factor is not None else (4.0 if a.d == 2 else 1.0)
        wins, lo, hi = _windows(a, shape, box, eps_factor, _parse_floats(args.ratios))
        exp = multipliers.kernel_ft_sup_experiment(K, a, wins, shape, box, quad)
        records = [r.to_dict() for r in exp.records({"kernel": args.kernel, "grid": list(shape)})]
        result.update({"sups": exp.sups, "plateau_variation": exp.variation,
                       "log_fit": exp.fit._asdict(), "resolved_range": [lo, hi]})
        if any(exp.flagged):
            code, reason = EXIT_NUMERIC, "window outside the resolved eta range"
    return code, result, records, reason


def _default_grid(d: int) -> tuple[int, ...]:
    return (1024, 1024) if d == 2 else (2048, 64, 64)


def _embed(args, kind: str):
    spec = _load(args)
    a = spec.homogeneity
    quad = _quadrature(a.d, args.quad)
    omega = spec.bundle(quad)
    shape = _parse_grid(args.grid) if args.grid else _default_grid(a.d)
    if len(shape) != a.d:
        raise UsageError(f"grid has {len(shape)} axes, pattern has {a.d}")
    box = multipliers.matched_box(a)
    eps_factor = args.eps_factor if args.eps_factor is not None else (4.0 if a.d == 2 else 1.0)
    wins, lo, hi = _windows(a, shape, box, eps_factor, _parse_floats(args.ratios))
    params = {"grid": list(shape), "pattern": list(a.a), "seed": args.seed, "input": args.input}
    if args.input == "near-delta":
        v = np.array([parse_complex(t) for t in args.vector.replace(",", " ").split()]) if args.vector else None
        if v is None:
            rep = cancellation.canceling_check(omega, quad)
            v = rep.V.frame[:, 0] if rep.v_dim else np.eye(omega.ambient_dim)[0]
        if v.size != omega.ambient_dim:
            raise UsageError("--vector has the wrong length")
        family = [("near-delta", multipliers.near_delta(shape, box, v))]
    else:
        scales = np.geomspace(3 * lo, hi / 2.1, 5)
        family = multipliers.bundle_family(shape, box, omega, a, scales, args.family_size, args.seed,
                                           symbol=spec.symbol())
    if kind == "linf":
        B = _functional(args.functional, spec, omega, quad)
        res = multipliers.linfty_embedding_experiment(omega, B, a, family, wins)
    else:
        res = multipliers.l2_embedding_experiment(omega, a, family, wins)
    transform = np.sqrt if kind == "l2" else (lambda x: x)
    # a single window admits no fit
    fit = res.fit(transform)._asdict() if len(wins) >= 2 else None
    result = {
        "max_ratios": res.max_ratios,
        "plateau_variation": res.variation,
        "fit": fit,
        "fit_variable": "sqrt(log(R/eps))" if kind == "l2" else "log(R/eps)",
        "resolved_range": [lo, hi],
        "members": res.labels,
    }
    records = [r.to_dict() for r in res.records(params)]
    if any(res.flagged):
        return EXIT_NUMERIC, result, records, "window outside the resolved eta range"
    return EXIT_PASS, result, records, None


def cmd_embed_linf(args):
    return _embed(args, "linf")


def cmd_embed_l2(args):
    return _embed(args, "l2")


def cmd_bilinear(args):
    k, lam = args.kappa, args.lam
    tau, sigma = parse_complex(args.tau1), parse_complex(args.sigma1)
    beta = cancellation.line_condition_beta(k, lam, args.alpha) if args.beta is None else args.beta
    reduced = cancellation.bilinear_reduced_integral(k, lam, args.alpha, beta, tau, sigma)
    quad = graded_circle_quadrature(args.quad or 256)
    sphere, scale = cancellation.bilinear_family_sphere(k, lam, args.alpha, beta, tau, sigma, quad)
    rebuilt = cancellation.bilinear_family_reduced(k, lam, args.alpha, beta, tau, sigma)
    vanishes = abs(sphere) <= args.tol * scale
    result = {
        "kappa": k, "lambda": lam, "alpha": args.alpha, "beta": beta,
        "tau1": tau, "sigma1": sigma,
        "reduced_integral": reduced,
        "sphere_integral": sphere,
        "sphere_from_reduced": rebuilt,
        "integrand_l1": scale,
        "vanishes": vanishes,
        "predicted_vanishing": cancellation.predicted_vanishing(k, lam, args.alpha, beta, tau, sigma),
    }
    return EXIT_PASS, result, [], None


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--quad", type=int, default=None, help="sphere quadrature resolution")

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--spec", help="operator-spec file")
    source.add_argument("--builtin", help="builtin name with parameters, e.g. 'kms kappa=1 lambda=1 N=1'")
    source.add_argument("--functional", default=None,
                        help="none | first-coord | coord:J | zeta:J | p-symbol "
                             "(default: none for check, first-coord otherwise)")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid", help="grid shape such as 1024x1024")
    grid.add_argument("--eps-factor", type=float, default=None,
                      help="eps as a multiple of the lowest resolved eta")
    grid.add_argument("--ratios", default="10,31.6227766,100", help="R/eps values")

    p = argparse.ArgumentParser(prog="anisocancel", description="Cancellation checks for anisotropic multipliers.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common, source], help="canceling / weak cancellation check")
    c.set_defaults(func=cmd_check)
    e = sub.add_parser("extend", parents=[common, source], help="build a canceling extension")
    e.add_argument("--basis-size", type=int, default=6)
    e.set_defaults(func=cmd_extend)
    m = sub.add_parser("mikhlin", parents=[common, grid], help="kernel cancellation and Dini modulus")
    m.add_argument("--kernel", choices=sorted(_KERNELS), default="zeta1")
    m.add_argument("--pattern", help="homogeneity pattern, e.g. '1 1' or '3/2 1/2'")
    m.add_argument("--experiment", action="store_true", help="also run the truncated-kernel transform experiment")
    m.set_defaults(func=cmd_mikhlin)
    for name, fn, helptext in (("embed-linf", cmd_embed_linf, "L1 -> L_inf multiplier ratios"),
                               ("embed-l2", cmd_embed_l2, "L1 -> L2 windowed Riesz ratios")):
        s = sub.add_parser(name, parents=[common, source, grid], help=helptext)
        s.add_argument("--input", choices=("family", "near-delta"), default="family")
        s.add_argument("--vector", help="vector for near-delta inputs (default: a vector of V)")
        s.add_argument("--family-size", type=int, default=20)
        s.set_defaults(func=fn)
    b = sub.add_parser("bilinear", parents=[common], help="bilinear condition for the two-variable family")
    b.add_argument("--kappa", type=int, required=True)
    b.add_argument("--lambda", dest="lam", type=int, required=True)
    b.add_argument("--alpha", type=float, required=True)
    b.add_argument("--beta", type=float, default=None, help="defaults to the line-condition value")
    b.add_argument("--tau1", required=True)
    b.add_argument("--sigma1", required=True)
    b.set_defaults(func=cmd_bilinear)
    return p


def _config(args) -> dict:
    skip = {"func", "output", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    """Parse ``argv``, run the command, write the report; returns the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if not 0 < args.tol < 1:
        parser.error("--tol must lie in (0, 1)")
    if args.quad is not None and args.quad < 8:
        parser.error("--quad must be at least 8")
    records: list = []
    result: dict = {}
    try:
        code, result, records, reason = args.func(args)
    except (UsageError, SpecError, OSError) as exc:
        code, reason = EXIT_USAGE, str(exc).splitlines()[0]
    except NonEllipticError as exc:
        code, reason = EXIT_USAGE, f"non-elliptic input: {str(exc).splitlines()[0]}"
    except ValueError as exc:
        code, reason = EXIT_USAGE, str(exc).splitlines()[0]
    report = _jsonable({
        "command": args.command,
        "status": _STATUS[code],
        "exit_code": code,
        "reason": reason,
        "seed": args.seed,
        "config": _config(args),
        "result": result,
        "records": records,
    })
    if args.format == "json":
        text = json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
    else:
        text = _render_text(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
