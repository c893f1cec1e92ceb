"""Command-line interface: ``saddlebvp solve|check|sweep|constants``.

Structured results go to JSON, per-iteration traces and sweep tables to
CSV.  Numbers are printed with 17 significant digits so doubles round-trip
exactly, every output file embeds a manifest header, and all randomness
flows from the single ``--seed`` flag, so identical invocations produce
byte-identical files.  Wall time is reported on stdout only.

Exit codes: 0 verified/passed, 2 unverified or counterexample found,
1 usage or input error.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .dependence import (DependenceError, ParameterSequence, run_sequence,
                         upper_limit_check)
from .expressions import ExprError
from .expressions import evaluate as expr_evaluate
from .expressions import parse as expr_parse
from .expressions import variables as expr_variables
from .grid import GridError, GridFunction, embedding_constant, embedding_estimate
from .hypotheses import (HypothesisError, ball_radii, certificate_from_dict,
                         check_concavity_y, check_convexity_x, verify_growth)
from .problem import ParameterFunction, ProblemError, problem_from_dict
from .solvers import SolverConfig, SolverError, saddle_set, verify_saddle

USER_ERRORS = (ProblemError, ExprError, GridError, HypothesisError,
               DependenceError, SolverError, OSError, ValueError)


# --- deterministic serialization --------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if not np.isfinite(v):
            return "null"
        return format(v, ".17g")
    raise TypeError(f"not a float: {v!r}")


def _json_text(obj, indent=0):
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [_json_text(v, indent + 1) for v in obj]
        if not items:
            return "[]"
        inner = ",\n".join("  " * (indent + 1) + s for s in items)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, dict):
        items = [f"{json.dumps(str(k))}: {_json_text(v, indent + 1)}" for k, v in obj.items()]
        if not items:
            return "{}"
        inner = ",\n".join("  " * (indent + 1) + s for s in items)
        return "{\n" + inner + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(_json_text(obj) + "\n")


def _write_csv(path, manifest, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("# manifest: " + json.dumps(manifest, separators=(",", ":")) + "\n")
        handle.write(",".join(header) + "\n")
        for row in rows:
            cells = [str(int(c)) if isinstance(c, (int, np.integer)) else _fmt(c)
                     for c in row]
            handle.write(",".join(cells) + "\n")


def _manifest(subcommand, problem_path, seed, config):
    return {
        "tool": "saddlebvp",
        "version": __version__,
        "subcommand": subcommand,
        "problem": str(problem_path) if problem_path else None,
        "seed": seed,
        "config": config,
    }


def _load_json(path):
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ProblemError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ProblemError(f"{path} must contain a JSON object")
    return data


def _out_prefix(args):
    if args.out:
        return args.out
    stem = os.path.splitext(os.path.basename(args.problem))[0]
    return stem


def _candidate_payload(cand, report=None):
    payload = {
        "x": list(cand.x.values),
        "y": list(cand.y.values),
        "value": cand.value,
        "grad_norm": cand.grad_norm,
        "residual_norm": cand.residual_norm,
        "method": cand.method,
        "iterations": cand.iterations,
        "converged": cand.converged,
    }
    if report is not None:
        payload["verified"] = report.passed
        payload["verification_failures"] = list(report.failures)
    return payload


def _solver_config(args):
    return SolverConfig(method=args.method, tol_grad=args.tol, tol_res=args.tol,
                        max_iter=args.max_iter, multistart=args.multistart,
                        seed=args.seed, record_trace=True)


def _radii_from_args(args, spec, data):
    cert_data = None
    if getattr(args, "certificate", None):
        cert_data = _load_json(args.certificate)
    elif "certificate" in data:
        cert_data = data["certificate"]
    if cert_data is None:
        return None, None
    cert = certificate_from_dict(cert_data, spec.T)
    radii = ball_radii(cert, embedding_constant(2, spec.T), spec.T)
    return cert, radii


# --- subcommands -------------------------------------------------------------

def cmd_solve(args):
    start = time.perf_counter()
    data = _load_json(args.problem)
    spec, u = problem_from_dict(data)
    cfg = _solver_config(args)
    _, radii = _radii_from_args(args, spec, data)
    sset = saddle_set(spec, u, cfg, radii=radii)
    reports = [verify_saddle(spec, u, cand, radii=radii, seed=args.seed)
               for cand in sset.points]

    config_echo = {"method": args.method, "tol": args.tol, "max_iter": args.max_iter,
                   "multistart": args.multistart}
    manifest = _manifest("solve", args.problem, args.seed, config_echo)
    prefix = _out_prefix(args)
    _write_json(prefix + ".saddle.json", {
        "manifest": manifest,
        "T": spec.T,
        "cluster_radius": sset.cluster_radius,
        "attempts": sset.attempts,
        "failed_starts": sset.failures,
        "saddle_points": [_candidate_payload(c, r) for c, r in zip(sset.points, reports)],
    })
    trace_rows = sset.points[0].trace if sset.points and sset.points[0].trace else []
    _write_csv(prefix + ".trace.csv", manifest,
               ["iter", "grad_norm", "residual", "value"], trace_rows)

    elapsed = time.perf_counter() - start
    verified = bool(sset.points) and all(r.passed for r in reports)
    for cand, rep in zip(sset.points, reports):
        status = "verified" if rep.passed else "UNVERIFIED"
        print(f"saddle value {cand.value:.12g}  residual {cand.residual_norm:.3e}  [{status}]")
    if not sset.points:
        print("no converged saddle point found")
    print(f"wrote {prefix}.saddle.json, {prefix}.trace.csv  (wall time {elapsed:.3f} s)")
    return 0 if verified else 2


def cmd_check(args):
    start = time.perf_counter()
    data = _load_json(args.problem)
    spec, u = problem_from_dict(data)
    cert_data = _load_json(args.certificate) if args.certificate else data.get("certificate")
    if cert_data is None:
        raise HypothesisError("no certificate: pass --certificate or embed one in the problem file")
    cert = certificate_from_dict(cert_data, spec.T)

    growth = verify_growth(spec, cert, grid_density=args.density)
    anchor_y = cert.anchor_y if cert.anchor_y is not None else GridFunction.zeros(spec.T)
    anchor_x = cert.anchor_x if cert.anchor_x is not None else GridFunction.zeros(spec.T)
    convex = check_convexity_x(spec, u, anchor_y, cert.box_radius, args.samples, seed=args.seed)
    concave = check_concavity_y(spec, u, anchor_x, cert.box_radius, args.samples, seed=args.seed)
    radii = None
    if growth.alpha_ok:
        radii = ball_radii(cert, embedding_constant(2, spec.T), spec.T)

    manifest = _manifest("check", args.problem, args.seed,
                         {"density": args.density, "samples": args.samples})
    payload = {
        "manifest": manifest,
        "growth": {
            "passed": growth.passed,
            "alpha_ok": growth.alpha_ok,
            "alpha_margins": list(growth.alpha_margins),
            "worst_lower_margin": growth.worst_lower_margin,
            "worst_upper_margin": growth.worst_upper_margin,
            "counterexample": growth.counterexample,
        },
        "convexity_in_x": {"passed": convex.passed, "exact": convex.exact,
                           "worst_margin": convex.worst_margin,
                           "counterexample": convex.counterexample},
        "concavity_in_y": {"passed": concave.passed, "exact": concave.exact,
                           "worst_margin": concave.worst_margin,
                           "counterexample": concave.counterexample},
        "ball_radii": None if radii is None else {
            "r1": radii.r1, "r2": radii.r2,
            "value_lower": radii.value_lower, "value_upper": radii.value_upper,
        },
    }
    prefix = _out_prefix(args)
    _write_json(prefix + ".check.json", payload)
    elapsed = time.perf_counter() - start
    ok = growth.passed and convex.passed and concave.passed
    if growth.counterexample and not growth.alpha_ok:
        print("margin violated: alpha bounds exceed 1/(2 c2)")
    print(f"growth: {'pass' if growth.passed else 'FAIL'}  "
          f"convexity: {'pass' if convex.passed else 'FAIL'}  "
          f"concavity: {'pass' if concave.passed else 'FAIL'}")
    print(f"wrote {prefix}.check.json  (wall time {elapsed:.3f} s)")
    return 0 if ok else 2


def _node_values(text, T):
    """Evaluate an expression in k at the nodes 1..T (no box constraint)."""
    ast = expr_parse(text)
    extra = expr_variables(ast) - {"k"}
    if extra:
        raise DependenceError(f"expression may only use k, found {sorted(extra)}")
    k = np.arange(1, T + 1, dtype=float)
    vals = expr_evaluate(ast, {"k": k, "x": 0.0, "y": 0.0, "u": 0.0})
    return np.broadcast_to(np.asarray(vals, dtype=float), (T,)).copy()


def _sequence_from_spec(seq_data, spec, u_default):
    if "u0" in seq_data:
        u0_term = seq_data["u0"]
        if isinstance(u0_term, str):
            u0 = ParameterFunction.from_expression(u0_term, spec.T, spec.D)
        else:
            u0 = ParameterFunction(np.asarray(u0_term, dtype=float), spec.D)
    else:
        u0 = u_default
    if "direction" in seq_data:
        direction = seq_data["direction"]
        if isinstance(direction, str):
            direction = _node_values(direction, spec.T)
        else:
            direction = np.asarray(direction, dtype=float)
        N = int(seq_data.get("N", 64))
        return ParameterSequence.rule(u0, direction, N)
    if "terms" in seq_data:
        terms = [ParameterFunction(np.asarray(t, dtype=float), spec.D)
                 for t in seq_data["terms"]]
        return ParameterSequence.from_terms(u0, terms)
    raise DependenceError("sequence spec needs either a direction or explicit terms")


def cmd_sweep(args):
    start = time.perf_counter()
    data = _load_json(args.problem)
    spec, u = problem_from_dict(data)
    seq_data = _load_json(args.sequence) if args.sequence else data.get("sequence")
    if seq_data is None:
        raise DependenceError("no sequence: pass --sequence or embed one in the problem file")
    seq = _sequence_from_spec(seq_data, spec, u)
    cfg = _solver_config(args)
    _, radii = _radii_from_args(args, spec, data)
    report = run_sequence(spec, seq, cfg, radii=radii, tol_dep=args.tol_dep)
    check = upper_limit_check(report, args.tol_dep)

    config_echo = {"method": args.method, "tol": args.tol, "max_iter": args.max_iter,
                   "multistart": args.multistart, "tol_dep": args.tol_dep,
                   "N": seq.N}
    manifest = _manifest("sweep", args.problem, args.seed, config_echo)
    prefix = _out_prefix(args)
    rows = [(e.n, e.value, e.dist, e.gap) for e in report.entries]
    _write_csv(prefix + ".sweep.csv", manifest, ["n", "a_n", "dist_n", "gap_n"], rows)
    _write_json(prefix + ".sweep.json", {
        "manifest": manifest,
        "a0": report.a0,
        "schedule": list(report.schedule),
        "final_dist": report.final_dist,
        "final_value_gap": report.final_value_gap,
        "all_nonempty": report.all_nonempty,
        "dist_converged": report.dist_converged,
        "values_converged": report.values_converged,
        "partial": report.partial,
        "upper_limit_check": {"passed": check.passed,
                              "limits": list(check.limits),
                              "violations": list(check.violations)},
    })
    elapsed = time.perf_counter() - start
    print(f"a0 = {report.a0:.12g}; final dist {report.final_dist:.3e}; "
          f"upper limit check {'pass' if check.passed else 'FAIL'}")
    print(f"wrote {prefix}.sweep.csv, {prefix}.sweep.json  (wall time {elapsed:.3f} s)")
    return 0 if check.passed else 2


def cmd_constants(args):
    if args.T is not None:
        T_values = [args.T]
    elif args.problem:
        data = _load_json(args.problem)
        spec, _ = problem_from_dict(data)
        T_values = [spec.T]
    else:
        raise GridError("constants needs --T or a problem file")
    print(f"{'m':>4} {'T':>6} {'constant':>24} {'exact':>6} {'safe upper':>24}")
    for T in T_values:
        for m in args.m:
            est = embedding_estimate(m, T, seed=args.seed)
            print(f"{m:>4} {T:>6} {est.value:>24.16g} {str(est.exact):>6} "
                  f"{est.upper_bound(args.safety):>24.16g}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="saddlebvp",
        description="Saddle-point solvers for second-order discrete boundary value systems")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, with_solver=True):
        p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
        p.add_argument("--out", default=None, help="output file prefix (default: problem stem)")
        if with_solver:
            p.add_argument("--method", default="newton",
                           choices=["extragradient", "newton", "nested"])
            p.add_argument("--tol", type=float, default=1e-10,
                           help="gradient and residual tolerance")
            p.add_argument("--max-iter", type=int, default=20000)
            p.add_argument("--multistart", type=int, default=8)

    p_solve = sub.add_parser("solve", help="compute and verify the saddle set")
    p_solve.add_argument("problem")
    p_solve.add_argument("--certificate", default=None,
                         help="growth certificate JSON for a priori ball radii")
    add_common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_check = sub.add_parser("check", help="verify a growth/convexity certificate")
    p_check.add_argument("problem")
    p_check.add_argument("--certificate", default=None)
    p_check.add_argument("--density", type=int, default=201,
                         help="sampling density for the growth bounds")
    p_check.add_argument("--samples", type=int, default=64,
                         help="sample count for the convexity checks")
    add_common(p_check, with_solver=False)
    p_check.set_defaults(func=cmd_check)

    p_sweep = sub.add_parser("sweep", help="solve along a convergent parameter sequence")
    p_sweep.add_argument("problem")
    p_sweep.add_argument("--sequence", default=None, help="sequence spec JSON")
    p_sweep.add_argument("--certificate", default=None)
    p_sweep.add_argument("--tol-dep", type=float, default=1e-4)
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_const = sub.add_parser("constants", help="print embedding constants")
    p_const.add_argument("problem", nargs="?", default=None)
    p_const.add_argument("--T", type=int, default=None)
    p_const.add_argument("-m", "--m", type=int, nargs="+", default=[2])
    p_const.add_argument("--safety", type=float, default=1.05)
    p_const.add_argument("--seed", type=int, default=0)
    p_const.set_defaults(func=cmd_constants)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
