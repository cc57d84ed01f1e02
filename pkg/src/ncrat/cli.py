"""Command line front end: ``ncrat <command> ...``.

Exit codes: 0 definite verdict, 2 input error, 3 no scalar center,
4 inconclusive.  Reports go to stdout (text, or JSON with --json);
certificates go to the --out path.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import jsonio
from .ellipticity import DEFAULT_TOL, Verdict, classify, verify_certificate
from .linalg import Field, adjoint, min_singular_value
from .ncexpr import (OutsideDomain, ParseError, eval_mp, eval_strict, format_expr, kappa,
                     nvars, parse, subexpressions, tau)
from .pencil import LinearPencil, full_rank_sample
from .realization import (BuildError, NoCenter, Realization, build, minimize,
                          original_pencil)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_CENTER = 3
EXIT_INCONCLUSIVE = 4


class InputError(ValueError):
    pass


class Inconclusive(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# helpers

def _field(args) -> Field:
    return Field.parse(args.field)


def _expr(args):
    return parse(args.expr, None, _field(args))


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        # packaged fixtures may be named without a path
        name = p.name if p.suffix == ".json" else p.name + ".json"
        res = resources.files("ncrat.data").joinpath(name)
        if not res.is_file():
            raise InputError(f"no such file: {path}")
        return json.loads(res.read_text())
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def _sizes(args) -> list[int]:
    return list(range(1, args.max_size + 1))


def _sample(L: LinearPencil, args, trials: int = 20):
    """Sampling cross-check, one task per size; deterministic under --seed."""
    sizes = _sizes(args)
    seeds = np.random.SeedSequence(args.seed).spawn(len(sizes))

    def run(k):
        return full_rank_sample(L, sizes=[sizes[k]], trials=trials, seed=seeds[k])

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        parts = list(pool.map(run, range(len(sizes))))
    best = min(parts, key=lambda s: s.min_sigma)
    return {
        "sizes": sizes,
        "trials_per_size": trials,
        "min_sigma": float(best.min_sigma),
        "min_relative_sigma": float(min(s.min_relative_sigma for s in parts)),
    }


def _pipeline(args):
    """parse -> build -> minimize -> classify, with the certificate re-checked."""
    e = _expr(args)
    g = nvars(e)
    R = minimize(build(e, None, g))
    L = original_pencil(R)
    cert = classify(L, args.tol)
    ok, why = verify_certificate(L, cert, args.tol)
    if cert.verdict is not Verdict.INCONCLUSIVE and not ok:
        raise Inconclusive(f"certificate failed verification: {why}")
    return e, R, L, cert, why


def _write_out(args, payload: dict):
    if args.out:
        Path(args.out).write_text(jsonio.dumps(payload) + "\n")


def _emit(args, report: dict, lines: list[str]):
    if args.json:
        print(jsonio.dumps(report))
    else:
        print("\n".join(lines))


def _matrix_text(a: np.ndarray) -> str:
    with np.printoptions(precision=6, suppress=True, linewidth=120):
        return str(a)


# ---------------------------------------------------------------------------
# commands

def cmd_parse(args) -> int:
    e = _expr(args)
    info = {"command": "parse", "expr": format_expr(e), "nvars": nvars(e), "tau": tau(e),
            "kappa": kappa(e), "subexpressions": len(subexpressions(e))}
    _emit(args, info, [f"{k}: {v}" for k, v in info.items() if k != "command"])
    return EXIT_OK


def cmd_eval(args) -> int:
    e = _expr(args)
    X = jsonio.decode_point(_load_json(args.point))
    if X.g < nvars(e):
        raise InputError(f"point has {X.g} components, expression uses {nvars(e)}")
    if args.mp:
        val = eval_mp(e, X)
    else:
        try:
            val = eval_strict(e, X)
        except OutsideDomain as exc:
            report = {"command": "eval", "defined": False, "reason": str(exc)}
            _emit(args, report, [str(exc)])
            return EXIT_OK
    field = Field.COMPLEX if np.iscomplexobj(val) and np.abs(val.imag).max() > 0 else Field.REAL
    report = {"command": "eval", "defined": True, "mp": bool(args.mp),
              "value": jsonio.encode_matrix(val, field), "field": field.value}
    _emit(args, report, [_matrix_text(val)])
    return EXIT_OK


def _realization_report(R: Realization, name: str) -> dict:
    return {"command": name, "size": R.size, "center": list(R.center),
            "realization": R.to_json()}


def cmd_realize(args) -> int:
    e = _expr(args)
    R = build(e, None, nvars(e))
    report = _realization_report(R, "realize")
    _write_out(args, R.to_json())
    _emit(args, report, [f"size: {R.size}", f"center: {list(R.center)}"])
    return EXIT_OK


def cmd_minimize(args) -> int:
    if args.realization:
        R = Realization.from_json(_load_json(args.realization))
    else:
        if args.expr is None:
            raise InputError("minimize needs an expression or --realization")
        e = _expr(args)
        R = build(e, None, nvars(e))
    M = minimize(R)
    report = _realization_report(M, "minimize")
    report["original_size"] = R.size
    _write_out(args, M.to_json())
    _emit(args, report, [f"size: {R.size} -> {M.size}", f"center: {list(M.center)}"])
    return EXIT_OK


def _chain_lines(cert) -> list[str]:
    out = []
    for k, s in enumerate(cert.chain):
        rank = len(s.eigs) - s.V.shape[1]
        out.append(f"  step {k + 1}: rank Re(D A0) = {rank} of {len(s.eigs)}")
    return out


def cmd_classify_pencil(args) -> int:
    try:
        L = LinearPencil.from_json(_load_json(args.pencil))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed pencil: {exc}") from exc
    cert = classify(L, args.tol)
    ok, why = verify_certificate(L, cert, args.tol)
    samp = _sample(L, args)
    report = {"command": "classify-pencil", "verdict": cert.verdict.value, "verified": ok,
              "verification": why, "certificate": cert.to_json(), "sampling": samp}
    if cert.verdict is Verdict.STABLY_ELLIPTIC and cert.epsilon is not None:
        report["sampling"]["consistent"] = samp["min_sigma"] ** 2 >= cert.epsilon - 1e-7
    _write_out(args, cert.to_json())
    lines = [f"verdict: {cert.verdict.value}", f"verified: {ok} ({why})"] + _chain_lines(cert)
    if cert.epsilon is not None:
        lines.append(f"epsilon: {cert.epsilon:.6g}")
    lines.append(f"sampling: min sigma {samp['min_sigma']:.3e} over sizes 1..{args.max_size}")
    _emit(args, report, lines)
    if cert.verdict is Verdict.INCONCLUSIVE or not ok:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _witness_outside(e, L, X) -> dict:
    try:
        eval_strict(e, X)
        expr_defined = True
    except OutsideDomain:
        expr_defined = False
    M = L.eval(X)
    return {"point": jsonio.encode_point(X), "size": X.n,
            "pencil_sigma_min": float(min_singular_value(M)),
            "pencil_norm": float(np.linalg.norm(M, 2)),
            "expression_defined": expr_defined}


def cmd_regular(args) -> int:
    e, R, L, cert, why = _pipeline(args)
    v = cert.verdict
    report = {"command": "regular", "expr": format_expr(e), "minimal_size": R.size,
              "verdict": v.value, "certificate": cert.to_json(), "verification": why}
    if v is Verdict.INCONCLUSIVE:
        report["regular"] = None
        _emit(args, report, [f"regular: inconclusive ({cert.message})",
                             f"minimal size: {R.size}"])
        return EXIT_INCONCLUSIVE
    regular = v is not Verdict.NOT_ELLIPTIC
    report["regular"] = regular
    _write_out(args, cert.to_json())
    if regular:
        kind = "stably elliptic" if v is Verdict.STABLY_ELLIPTIC else "elliptic, not stably"
        head = f"regular: yes ({kind})"
    else:
        head = "regular: no"
        if cert.witness is not None:
            report["witness"] = _witness_outside(e, L, cert.witness)
    lines = [head, f"minimal size: {R.size}"] + _chain_lines(cert)
    if "witness" in report:
        w = report["witness"]
        lines.append(f"witness of size {w['size']}: sigma_min(L(X)) = {w['pencil_sigma_min']:.3e}")
    _emit(args, report, lines)
    return EXIT_OK


def cmd_stably_bounded(args) -> int:
    e, R, L, cert, why = _pipeline(args)
    v = cert.verdict
    report = {"command": "stably-bounded", "expr": format_expr(e), "minimal_size": R.size,
              "verdict": v.value, "certificate": cert.to_json(), "verification": why}
    if v is Verdict.INCONCLUSIVE:
        report["stably_bounded"] = None
        _emit(args, report, [f"stably bounded: inconclusive ({cert.message})"])
        return EXIT_INCONCLUSIVE
    yes = v is Verdict.STABLY_ELLIPTIC
    report["stably_bounded"] = yes
    report["regular"] = v is not Verdict.NOT_ELLIPTIC
    _write_out(args, cert.to_json())
    lines = [f"stably bounded: {'yes' if yes else 'no'}", f"minimal size: {R.size}"]
    if yes:
        report["epsilon"] = cert.epsilon
        # L(X)* L(X) >= eps on self-adjoint tuples, which persists on a
        # neighbourhood of them and bounds c* L^{-1} b there
        lines.append(f"epsilon: {cert.epsilon:.6g} (L(X)* L(X) >= epsilon at self-adjoint X)")
    elif v is Verdict.ELLIPTIC:
        lines.append("regular, but the pencil is only elliptic")
    _emit(args, report, lines)
    return EXIT_OK


def cmd_sohs(args) -> int:
    from .positivity import (mp_counterexample, mp_value_min_eig,
                             positively_elliptic_realization, sohs_decompose, verify_sohs,
                             is_positively_elliptic)

    e = _expr(args)
    g = nvars(e)
    cert = sohs_decompose(e, args.degree, args.tol, args.seed, g=g)
    report = {"command": "sohs", "expr": format_expr(e)}
    if cert is not None:
        ok, why = verify_sohs(e, cert, args.tol, seed=args.seed + 7)
        if not ok:
            report.update({"sohs": None, "reason": why})
            _emit(args, report, [f"sohs: inconclusive ({why})"])
            return EXIT_INCONCLUSIVE
        R = positively_elliptic_realization(cert)
        report.update({"sohs": True, "certificate": cert.to_json(), "verification": why,
                       "realization": {"size": R.size,
                                       "positively_elliptic": is_positively_elliptic(R.pencil),
                                       "data": R.to_json()}})
        _write_out(args, cert.to_json())
        lines = [f"sohs: yes ({len(cert.squares)} squares, k = {cert.k}, "
                 f"dim W = {len(cert.basis)})"]
        lines += [f"  s{j + 1} = {format_expr(s)}" for j, s in enumerate(cert.squares)]
        lines.append(f"residual: max {cert.residual['max']:.2e} on {cert.residual['points']} points")
        lines.append(f"positively elliptic realization of size {R.size}")
        _emit(args, report, lines)
        return EXIT_OK
    X = mp_counterexample(e, args.degree, args.tol, args.seed, g=g)
    if X is None:
        report.update({"sohs": None, "reason": "no certificate and no counterexample"})
        _emit(args, report, ["sohs: inconclusive (no certificate and no counterexample)"])
        return EXIT_INCONCLUSIVE
    val = eval_mp(e, X)
    spec = np.linalg.eigvalsh(0.5 * (val + adjoint(val)))
    report.update({"sohs": False, "counterexample": jsonio.encode_point(X),
                   "mp_spectrum": [float(v) for v in spec],
                   "min_eigenvalue": mp_value_min_eig(e, X)})
    _write_out(args, jsonio.encode_point(X))
    _emit(args, report, ["sohs: no",
                         f"counterexample of size {X.n}; spectrum of r_MP(X): "
                         + ", ".join(f"{v:.6g}" for v in spec)])
    return EXIT_OK


def cmd_strictly_positive(args) -> int:
    from .positivity import NotRegular, Positivity, strictly_positive

    e = _expr(args)
    try:
        rep = strictly_positive(e, args.tol, nvars(e))
    except NotRegular as exc:
        report = {"command": "strictly-positive", "expr": format_expr(e), "rejected": str(exc)}
        _emit(args, report, [f"rejected: {exc}"])
        return EXIT_INPUT
    report = {"command": "strictly-positive", "expr": format_expr(e),
              "verdict": rep.verdict.value, "message": rep.message,
              "inverse_verdict": rep.inverse_verdict.value if rep.inverse_verdict else None}
    label = {Positivity.STRICTLY_POSITIVE: "yes", Positivity.NOT_STRICTLY_POSITIVE: "no",
             Positivity.INCONCLUSIVE: "inconclusive"}[rep.verdict]
    _emit(args, report, [f"strictly positive: {label} ({rep.message})"])
    return EXIT_INCONCLUSIVE if rep.verdict is Positivity.INCONCLUSIVE else EXIT_OK


def cmd_witness(args) -> int:
    if args.pencil:
        L = LinearPencil.from_json(_load_json(args.pencil))
        e = None
        cert = classify(L, args.tol)
    else:
        if args.expr is None:
            raise InputError("witness needs an expression or --pencil")
        e, R, L, cert, _ = _pipeline(args)
    report = {"command": "witness", "verdict": cert.verdict.value}
    if cert.verdict is Verdict.INCONCLUSIVE:
        _emit(args, report, [f"inconclusive ({cert.message})"])
        return EXIT_INCONCLUSIVE
    if cert.verdict is not Verdict.NOT_ELLIPTIC:
        report["witness"] = None
        _emit(args, report, [f"no witness: the pencil is {cert.verdict.value}"])
        return EXIT_OK
    if cert.witness is None:
        _emit(args, report, ["not elliptic, but witness extraction failed"])
        return EXIT_INCONCLUSIVE
    X = cert.witness
    if e is not None:
        report["witness"] = _witness_outside(e, L, X)
    else:
        M = L.eval(X)
        report["witness"] = {"point": jsonio.encode_point(X), "size": X.n,
                             "pencil_sigma_min": float(min_singular_value(M))}
    _write_out(args, jsonio.encode_point(X))
    _emit(args, report, [f"witness of size {X.n}: sigma_min = "
                         f"{report['witness']['pencil_sigma_min']:.3e}"])
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _tolerance(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1e-2:
        raise argparse.ArgumentTypeError("tolerance must lie in (0, 1e-2]")
    return v


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--field", choices=["r", "c", "R", "C"], default="r",
                   help="scalar field of the expression (default r)")
    p.add_argument("--tol", type=_tolerance, default=DEFAULT_TOL)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, default=None, help="SOHS degree k (default 2 tau + 1)")
    p.add_argument("--max-size", type=int, default=6, help="largest sampled matrix size")
    p.add_argument("--json", action="store_true", help="JSON report on stdout")
    p.add_argument("--threads", type=int, default=1, help="threads for sampling checks")
    p.add_argument("--out", default=None, help="write the certificate JSON here")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ncrat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, expr=True, optional_expr=False):
        p = sub.add_parser(name, parents=[common], help=help_text)
        if expr:
            p.add_argument("expr", nargs="?" if optional_expr else None)
        p.set_defaults(func=func)
        return p

    add("parse", cmd_parse, "parse and summarize an expression")
    p = add("eval", cmd_eval, "evaluate at a point given as JSON")
    p.add_argument("point")
    p.add_argument("--mp", action="store_true", help="Moore-Penrose evaluation")
    add("realize", cmd_realize, "build a realization")
    p = add("minimize", cmd_minimize, "minimal realization", optional_expr=True)
    p.add_argument("--realization", default=None, help="realization JSON instead of an expression")
    p = add("classify-pencil", cmd_classify_pencil, "classify a pencil given as JSON", expr=False)
    p.add_argument("pencil")
    add("regular", cmd_regular, "is the function regular?")
    add("stably-bounded", cmd_stably_bounded, "is the function stably bounded?")
    add("sohs", cmd_sohs, "sum of hermitian squares certificate or counterexample")
    add("strictly-positive", cmd_strictly_positive, "positive definite at every self-adjoint tuple?")
    p = add("witness", cmd_witness, "a self-adjoint tuple outside the domain", optional_expr=True)
    p.add_argument("--pencil", default=None, help="pencil JSON instead of an expression")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.max_size < 1 or args.threads < 1:
        print("error: --max-size and --threads must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (ParseError, InputError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoCenter as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CENTER
    except (Inconclusive, BuildError, np.linalg.LinAlgError) as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
