"""Command-line entry point: ``classo bench`` and ``classo solve``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .bench import SOLVERS, ExperimentPlan, FileSource, PlanError, emit_table, run_plan
from .data import LibsvmParseError, Scenario, SyntheticSpec

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_INVALID = 2
EXIT_IO = 3

_COMPLETED = {"converged", "max_outer", "max_iter"}


def _float_list(text: str) -> List[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    return values


def _name_list(text: str) -> List[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def _scenario(text: str) -> Scenario:
    try:
        return Scenario.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", type=_scenario, default=Scenario.SUM_ZERO,
                   help="sum-zero, random-b or genlasso")
    p.add_argument("--s", type=int, default=30,
                   help="number of constraints (random-b) or rows of D2 (genlasso)")
    p.add_argument("--lambda-l", type=_float_list, default=[1e-2, 1e-3, 1e-4],
                   help="comma-separated fractions of ||A^T b||_inf")
    p.add_argument("--solvers", type=_name_list, default=list(SOLVERS),
                   help=f"comma-separated subset of {','.join(SOLVERS)}")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--baseline-eps", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=10_000,
                   help="iteration cap for the first-order baselines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="classo", description="Constrained Lasso solvers and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run solvers on a synthetic instance")
    bench.add_argument("--m", type=int, required=True)
    bench.add_argument("--n", type=int, required=True)
    bench.add_argument("--sparsity", type=float, default=0.01)
    bench.add_argument("--noise-var", type=float, default=1e-3)
    _add_common(bench)

    solve = sub.add_parser("solve", help="run solvers on a LIBSVM regression file")
    solve.add_argument("--input", type=Path, required=True)
    solve.add_argument("--degree", type=int, default=1)
    solve.add_argument("--scale", action="store_true", help="min-max scale features to [-1, 1]")
    _add_common(solve)
    return parser


def plan_from_args(args: argparse.Namespace) -> ExperimentPlan:
    if args.command == "bench":
        if args.m < 1 or args.n < 1:
            raise PlanError("m and n must be positive")
        source = SyntheticSpec(args.m, args.n, seed=args.seed, sparsity=args.sparsity,
                               noise_var=args.noise_var)
    else:
        source = FileSource(str(args.input), degree=args.degree, scale=args.scale)
    return ExperimentPlan(
        scenario=args.scenario,
        source=source,
        lambda_l_list=args.lambda_l,
        solvers=args.solvers,
        eps=args.eps,
        baseline_eps=args.baseline_eps,
        output_dir=args.out,
        seed=args.seed,
        s=args.s,
        jobs=args.jobs,
        max_iter=args.max_iter,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        plan = plan_from_args(args)
        plan.validate()
        records = run_plan(plan)
    except (PlanError, LibsvmParseError, ValueError) as exc:
        print(f"classo: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"classo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    text, _ = emit_table(records)
    print(text, end="")
    failed = [r for r in records if r.status not in _COMPLETED]
    if failed:
        for r in failed:
            print(f"classo: {r.solver} at lambda_l={r.lambda_l:g} ended with {r.status}",
                  file=sys.stderr)
        return EXIT_RUN_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
