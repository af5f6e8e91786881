"""Command-line front end.

Exit codes: 0 on completion (a run that hit its iteration cap still counts),
1 on configuration errors, 2 on numerical or I/O failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as uio
from .accelerated import AccelConfig
from .core import UotProblem
from .errors import NumericalError, ProvenanceMismatch
from .experiments import (
    PRESETS,
    SolverConfig,
    compute_reference,
    gap_trace,
    load_preset,
    random_problem,
    sparsity_ratio,
)
from .oracle import closed_form_result, projected_descent_reference
from .scaling import InnerStopRule

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_problem_args(p):
    g = p.add_argument_group("problem")
    g.add_argument("--preset", choices=PRESETS)
    g.add_argument("--std-interpretation", action="store_true",
                   help="read the preset's Gaussian parameters as standard deviations")
    g.add_argument("--a", type=Path, help="source marginal (vector file)")
    g.add_argument("--b", type=Path, help="target marginal (vector file)")
    g.add_argument("--cost", type=Path, help="cost matrix file")
    g.add_argument("--random", nargs=2, type=int, metavar=("N", "M"),
                   help="seeded random instance of size N x M")
    g.add_argument("--seed", type=int, default=0, help="seed for --random")
    g.add_argument("--lambda1", type=float, default=None)
    g.add_argument("--lambda2", type=float, default=None)


def load_problem(args):
    sources = [args.preset is not None, args.a is not None or args.b is not None or args.cost is not None,
               args.random is not None]
    if sum(sources) != 1:
        raise ConfigError("give exactly one of --preset, --a/--b/--cost, or --random")
    l1 = 1.0 if args.lambda1 is None else args.lambda1
    l2 = 1.0 if args.lambda2 is None else args.lambda2
    if args.preset is not None:
        prob = load_preset(args.preset, std_interpretation=args.std_interpretation)
        if args.lambda1 is None and args.lambda2 is None:
            return prob
        return UotProblem(prob.a, prob.b, prob.cost, l1, l2)
    if args.random is not None:
        n, m = args.random
        if n < 1 or m < 1:
            raise ConfigError("--random sizes must be positive")
        return random_problem(n, m, args.seed, l1, l2)
    missing = [name for name in ("a", "b", "cost") if getattr(args, name) is None]
    if missing:
        raise ConfigError("missing problem files: " + ", ".join("--" + m for m in missing))
    for path in (args.a, args.b, args.cost):
        if not path.is_file():
            raise ConfigError(f"no such file: {path}")
    return UotProblem(uio.read_matrix(args.a), uio.read_matrix(args.b),
                      uio.read_matrix(args.cost), l1, l2)


def solver_config(args):
    if args.solver == "scaling":
        if args.eps is None or args.beta is not None:
            raise ConfigError("scaling takes --eps (and not --beta)")
        weight = args.eps
    else:
        if args.beta is None or args.eps is not None:
            raise ConfigError(f"{args.solver} takes --beta (and not --eps)")
        weight = args.beta
    if args.inner_tol is not None:
        inner = InnerStopRule.residual(args.inner_tol)
    else:
        inner = InnerStopRule.fixed(args.inner_sweeps)
    accel = AccelConfig(sigma=args.sigma, t_exp=args.t_exp, tau_doubling=not args.no_tau_doubling)
    return SolverConfig(solver=args.solver, weight=weight, iters=args.iters, inner=inner,
                        accel=accel, stabilized=args.stabilized, tol=args.tol)


def cmd_solve(args):
    try:
        problem = load_problem(args)
        cfg = solver_config(args)
        reference = uio.read_reference(args.truth) if args.truth else None
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if reference is not None and reference.problem_digest != problem.digest():
        print("error: truth file was computed on a different problem", file=sys.stderr)
        return EXIT_CONFIG

    try:
        P, trace = cfg.run(problem)
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        partial = getattr(exc, "trace", None)
        if partial is not None:
            try:
                uio.write_trace_csv(args.trace_out, partial, reference, args.wall_time, error=exc)
            except OSError as io_exc:
                print(f"error: {io_exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        uio.write_trace_csv(args.trace_out, trace, reference, args.wall_time)
        if args.plan_out is not None:
            uio.write_plan(args.plan_out, P)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    last = trace.records[-1]
    print(f"{cfg.label}: k={last.k} objective={uio.fmt(last.objective)}"
          + ("" if trace.converged is not False else " (not converged)"))
    return EXIT_OK


def cmd_truth(args):
    if args.iters < 1 or not args.beta > 0:
        print("error: --iters must be >= 1 and --beta > 0", file=sys.stderr)
        return EXIT_CONFIG
    if args.preset is None and args.a is None and args.random is None:
        args.preset = "gaussian1d"
    try:
        problem = load_problem(args)
        inner = InnerStopRule.fixed(args.inner_sweeps)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        ref = compute_reference(problem, beta=args.beta, iters=args.iters, inner=inner)
        uio.write_reference(args.out, ref)
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"f* = {uio.fmt(ref.objective)}")
    return EXIT_OK


def load_compare_spec(path):
    """Comparison spec: JSON ``{"preset": ..., "runs": [solver config, ...]}``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        doc = {"runs": doc}
    runs = doc.get("runs") or []
    if not runs:
        raise ConfigError("comparison spec lists no runs")
    return doc, [SolverConfig.from_dict(r) for r in runs]


def cmd_compare(args):
    try:
        doc, configs = load_compare_spec(args.spec)
        reference = uio.read_reference(args.truth)
        problem = load_preset(doc.get("preset", "gaussian1d"),
                              std_interpretation=bool(doc.get("std_interpretation", False)))
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    blocks = []
    status = EXIT_OK
    for cfg in configs:
        try:
            _, trace = cfg.run(problem)
        except NumericalError as exc:
            print(f"{cfg.label}: numerical failure: {exc}", file=sys.stderr)
            trace = exc.trace
            status = EXIT_NUMERIC
        try:
            blocks.append((cfg.label, gap_trace(trace, reference)))
        except ProvenanceMismatch as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        with open(args.out, "w", encoding="ascii", newline="") as fh:
            uio.write_gap_csv(fh, blocks)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return status


def cmd_sparsity(args):
    try:
        P = uio.read_plan(args.plan)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        ratio = sparsity_ratio(P, args.threshold)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(uio.fmt(ratio))
    return EXIT_OK


def cmd_oracle(args):
    try:
        problem = load_problem(args)
        if problem.shape == (1, 1):
            res = closed_form_result(problem)
        else:
            res = projected_descent_reference(problem, iters=args.iters, tol=args.tol)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.plan_out is not None:
        uio.write_plan(args.plan_out, res.plan)
    print(json.dumps({"method": res.method, "objective": uio.fmt(res.objective),
                      "certified_tol": uio.fmt(res.certified_tol),
                      "converged": bool(res.converged)}, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = ArgumentParser(prog="uotprox", description="Unbalanced OT solvers and benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("solve", help="run one solver and write its trace and plan")
    p.add_argument("--solver", choices=("scaling", "ibpuot", "aibpuot"), required=True)
    _add_problem_args(p)
    p.add_argument("--beta", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--iters", type=int, default=1000, help="outer iterations (sweeps for scaling)")
    inner = p.add_mutually_exclusive_group()
    inner.add_argument("--inner-sweeps", type=int, default=1)
    inner.add_argument("--inner-tol", type=float)
    p.add_argument("--tol", type=float, default=1e-9, help="scaling stopping residual")
    p.add_argument("--stabilized", action="store_true", help="log-domain scaling")
    p.add_argument("--sigma", type=float, help="estimate-sequence weight (default: beta)")
    p.add_argument("--t-exp", type=float, default=0.5)
    p.add_argument("--no-tau-doubling", action="store_true")
    p.add_argument("--truth", type=Path, help="reference JSON; adds a gap column")
    p.add_argument("--trace-out", type=Path, default=Path("trace.csv"))
    p.add_argument("--plan-out", type=Path, default=Path("plan.txt"))
    p.add_argument("--wall-time", action="store_true", help="fill the wall_ns column")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("truth", help="compute the reference objective f*")
    _add_problem_args(p)
    p.add_argument("--beta", type=float, default=0.005)
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--inner-sweeps", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("truth.json"))
    p.set_defaults(func=cmd_truth)

    p = sub.add_parser("compare", help="gap traces of several solver configs")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("compare.csv"))
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sparsity", help="fraction of near-zero plan entries")
    p.add_argument("--plan", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=1e-6)
    p.set_defaults(func=cmd_sparsity)

    p = sub.add_parser("oracle", help="independent reference solve of a small instance")
    _add_problem_args(p)
    p.add_argument("--iters", type=int, default=200_000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--plan-out", type=Path)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
