"""Command-line interface: ``stalib {run,experiment,verify,list}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Human-readable
reports go to stdout; machine-readable output only to the files named by
``--out`` / ``--out-dir``.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .algorithms import MODELS, VARIANTS
from .benchmarks import BENCHMARKS, DimensionTooSmall, UnknownBenchmark, make_benchmark, resolve_name
from .experiment import (
    ExperimentError,
    ExperimentPlan,
    default_workers,
    export_results,
    load_plan,
    run_experiment,
    run_trial,
    write_curve,
)
from .verify import run_verification

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
_TERMINATION = {"designed": "designed", "max-fes": "max_fes", "max-stalls": "max_stalls"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _csv_list(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stalib", description="State transition algorithms for box-bounded minimisation.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def budget_flags(p, with_defaults):
        # experiment flags default to None so that only explicit ones override a plan file
        d = (lambda v: v) if with_defaults else (lambda v: None)
        p.add_argument("--termination", choices=list(_TERMINATION), default=d("designed"))
        p.add_argument("--max-fes", type=int, help="evaluation budget (default 1e4*n in max-fes mode)")
        p.add_argument("--max-stalls", type=int, help="consecutive non-improving iterations (max-stalls mode)")
        p.add_argument("--se", type=int, default=d(30), help="candidates per operator (default 30)")
        p.add_argument("--epsilon", type=float, default=d(1e-8), help="solution accuracy (default 1e-8)")
        p.add_argument("--model", choices=MODELS, default=d("hybrid"), help="predictive translation model")

    r = sub.add_parser("run", help="one seeded run on a benchmark")
    r.add_argument("--benchmark", required=True)
    r.add_argument("--dim", type=int, required=True)
    r.add_argument("--algo", choices=VARIANTS, required=True)
    r.add_argument("--seed", type=int, default=0)
    budget_flags(r, True)
    r.add_argument("--out", help="write the convergence curve (evaluations,fbest) to this CSV file")

    e = sub.add_parser("experiment", help="multi-seed batch with summary statistics")
    e.add_argument("--plan", help="JSON plan file; inline flags override its entries")
    e.add_argument("--benchmarks", help="comma-separated ids, or 'all'")
    e.add_argument("--dims", type=_int_list, help="comma-separated dimensions (default 20)")
    e.add_argument("--algos", help="comma-separated variants (default esta)")
    e.add_argument("--runs", type=int, help="seeds per cell (default 30)")
    e.add_argument("--base-seed", type=int, help="seed of the first run (default 42)")
    e.add_argument("--out-dir", default="results")
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.add_argument("--workers", type=int, help="parallel processes (default: available CPUs)")
    budget_flags(e, False)

    v = sub.add_parser("verify", help="gradient, optimum and operator self-checks")
    v.add_argument("--benchmark", help="restrict to one benchmark")
    v.add_argument("--points", type=int, default=100, help="random points per dimension for the gradient check")

    sub.add_parser("list", help="registered benchmarks and algorithm variants")
    return parser


def _err(msg: str):
    print(msg, file=sys.stderr)


def _fmt(x) -> str:
    return "%.2e" % x


def cmd_run(args) -> int:
    name = resolve_name(args.benchmark)
    make_benchmark(name, args.dim)
    mode = _TERMINATION[args.termination]
    if mode == "max_stalls" and args.max_stalls is None:
        raise UsageError("--termination max-stalls needs --max-stalls")
    plan = ExperimentPlan(
        benchmarks=(name,), dims=(args.dim,), algorithms=(args.algo,), runs=1, base_seed=args.seed,
        termination=mode, max_fes=args.max_fes, max_stalls=args.max_stalls, se=args.se,
        epsilon=args.epsilon, predictive_model=args.model,
    )
    config = plan.config_for(args.algo, args.dim)
    t = run_trial(name, args.dim, config, args.seed)
    cap = config.termination.max_fes
    rows = [
        ("benchmark", f"{name} ({BENCHMARKS[name].fid}), n = {args.dim}"),
        ("algorithm", f"{args.algo}, seed {args.seed}"),
        ("termination", f"{mode}" + (f", cap {cap} evaluations" if cap else "")),
        ("fbest", _fmt(t.fbest)),
        ("gradnorm", _fmt(t.grad_norm) + (f" ({t.grad_flag})" if t.grad_flag else "")),
        ("evaluations", str(t.evaluations)),
        ("iterations", str(t.iterations)),
        ("reason", t.termination_reason),
        ("time", f"{t.wall_time:.2f} s"),
    ]
    for k, v in rows:
        print(f"{k:<12} {v}")
    if args.out:
        write_curve(args.out, t.curve)
        print(f"{'curve':<12} {args.out}")
    return EXIT_OK


def _plan_from_args(args) -> ExperimentPlan:
    benchmarks = args.benchmarks
    if benchmarks is not None:
        benchmarks = tuple(BENCHMARKS) if benchmarks.strip().lower() == "all" else tuple(_csv_list(benchmarks))
    given = dict(
        benchmarks=benchmarks,
        dims=None if args.dims is None else tuple(args.dims),
        algorithms=None if args.algos is None else tuple(_csv_list(args.algos)),
        runs=args.runs,
        base_seed=args.base_seed,
        termination=_TERMINATION[args.termination] if args.termination else None,
        max_fes=args.max_fes,
        max_stalls=args.max_stalls,
        se=args.se,
        epsilon=args.epsilon,
        predictive_model=args.model,
        workers=args.workers,
    )
    given = {k: v for k, v in given.items() if v is not None}
    if args.plan:
        return load_plan(args.plan, **given)
    given.setdefault("dims", (20,))
    given.setdefault("workers", default_workers())
    return ExperimentPlan(**given)


def cmd_experiment(args) -> int:
    try:
        plan = _plan_from_args(args)
    except (ExperimentError, UnknownBenchmark, DimensionTooSmall, ValueError) as exc:
        raise UsageError(f"invalid plan: {exc}")
    cells = plan.cells()
    print(f"{len(cells)} cells x {plan.runs} runs, seeds {plan.base_seed}..{plan.base_seed + plan.runs - 1}, "
          f"{plan.workers} worker(s)")
    result = run_experiment(plan)
    export_results(result.trials, result.summaries, args.format, args.out_dir, result.failures)
    header = f"{'benchmark':<12} {'dim':>4} {'algorithm':<13} {'objval_mean':>11} {'objval_std':>11} " \
             f"{'gradnorm':>10} {'evals':>10}"
    print(header)
    for s in result.summaries:
        flag = "" if s.complete else f"  INCOMPLETE ({s.failed} failed)"
        print(f"{s.benchmark:<12} {s.dim:>4} {s.algorithm:<13} {_fmt(s.objval_mean):>11} "
              f"{_fmt(s.objval_std):>11} {_fmt(s.gradnorm_mean):>10} {_fmt(s.evals_mean):>10}{flag}")
    print(f"results written to {args.out_dir}")
    for f in result.failures[:5]:
        _err(f"run failed: {f.benchmark} n={f.dim} {f.algorithm} seed {f.seed}: {f.error}")
    if cells and all(s.runs == 0 for s in result.summaries):
        _err("every cell failed")
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(args) -> int:
    names = None if args.benchmark is None else [resolve_name(args.benchmark)]

    def emit(r):
        status = "ok" if r.passed else "FAIL"
        note = f"  [{r.notice}]" if r.notice else ""
        print(f"{r.subject:<12} {r.check:<22} {status:<5} {r.detail}{note}")

    report = run_verification(names, points=args.points, emit=emit)
    ok, total = report.benchmarks_verified()
    print(f"{ok}/{total} benchmarks verified")
    bad = report.first_failure()
    if bad is not None:
        _err(f"verification failed: {bad.subject} {bad.check} ({bad.detail})")
        return EXIT_FAIL
    return EXIT_OK


def cmd_list(args) -> int:
    print("benchmarks:")
    for name, d in BENCHMARKS.items():
        lo, hi = d.bounds(20)
        print(f"  {d.fid:<4} {name:<12} n >= {d.min_dim}  box at n=20: [{lo:g}, {hi:g}]  "
              f"{', '.join(sorted(d.tags))}")
    print("algorithms:")
    for v in VARIANTS:
        print(f"  {v}")
    return EXIT_OK


_COMMANDS = {"run": cmd_run, "experiment": cmd_experiment, "verify": cmd_verify, "list": cmd_list}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except UnknownBenchmark as exc:
        _err(exc.args[0] if exc.args else "unknown benchmark")
        return EXIT_USAGE
    except (DimensionTooSmall, ExperimentError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except Exception as exc:
        _err(f"error: {type(exc).__name__}: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
