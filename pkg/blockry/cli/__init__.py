"""
Command-line front end: `blockry run`, `blockry inspect` and `blockry reproduce`.

Exit codes: 0 converged, 2 iteration budget exhausted, 1 error.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional, Tuple

from .. import config
from .._logging import get_logger, set_log_level
from ..data import ExperimentName
from ..exceptions import BlockryError, ProblemFileNotFoundError
from ..utils.functions import run_in_processes
from .inspection import inspect, replay
from .records import IterationRecord, csv_header
from .run import EXIT_BUDGET, EXIT_CONVERGED, EXIT_ERROR, RunConfig, RunResult, execute, run

logger = get_logger("cli")


def _add_problem_arguments(parser: argparse.ArgumentParser):
    parser.add_argument(
        "problem",
        type=str,
        help="built-in experiment (" + ", ".join(e.value for e in ExperimentName) + ") or Matrix Market file",
    )
    parser.add_argument("--rhs", type=str, default=None, help="Matrix Market file with right-hand sides")
    parser.add_argument("--matrix", type=str, default=None, help="sherman4 matrix file for sherman4-mixed")
    parser.add_argument("--block-size", type=int, default=2, help="number of random right-hand sides without --rhs")
    parser.add_argument("--max-iter", type=int, default=None, help="iteration budget")
    parser.add_argument("--tol", type=float, default=None, help="relative per-column residual tolerance")
    parser.add_argument("--seed", type=int, default=None, help="seed of the replacement vectors")


class ArgumentParser(argparse.ArgumentParser):
    """Exits with EXIT_ERROR on invalid arguments."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(
        prog="blockry",
        description="Block GMRES / block FOM solver with stagnation diagnostics.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="log debug messages")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="log warnings and errors only")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="solve a problem and write iteration data")
    _add_problem_arguments(run_parser)
    run_parser.add_argument("--out", type=str, default=None, help="output directory")
    run_parser.add_argument("--emit-fom", action="store_true", help="write (generalized) FOM residuals")
    run_parser.add_argument("--diagnostics", action="store_true", help="write stagnation diagnostics")
    run_parser.add_argument("--verify", action="store_true", help="check the GMRES/FOM identities (implies --diagnostics)")
    run_parser.add_argument("--no-plot", action="store_true", help="do not write plot.gp")

    inspect_parser = subparsers.add_parser("inspect", help="print the C and N matrices of one iteration")
    _add_problem_arguments(inspect_parser)
    inspect_parser.add_argument("--at", type=int, required=True, help="iteration to inspect")
    inspect_parser.add_argument("--json", action="store_true", help="print JSON instead of text")

    reproduce_parser = subparsers.add_parser(
        "reproduce", help="run all built-in experiments in parallel processes"
    )
    reproduce_parser.add_argument("--out", type=str, default=None, help="parent output directory")
    reproduce_parser.add_argument("--matrix", type=str, default=None, help="sherman4 matrix file")
    reproduce_parser.add_argument("--max-iter", type=int, default=None, help="iteration budget")
    return parser


def _config_from_args(args: argparse.Namespace, **overrides) -> RunConfig:
    kwargs = dict(
        problem=args.problem,
        rhs=args.rhs,
        matrix=args.matrix,
        block_size=args.block_size,
        progress=not getattr(args, "quiet", False),
    )
    if args.max_iter is not None:
        kwargs["max_iterations"] = args.max_iter
    if args.tol is not None:
        kwargs["tolerance"] = args.tol
    if args.seed is not None:
        kwargs["seed"] = args.seed
    kwargs.update(overrides)
    return RunConfig(**kwargs)


def _reproduce_one(cfg: RunConfig) -> Tuple[str, int, str]:
    try:
        return cfg.problem, run(cfg), ""
    except ProblemFileNotFoundError as exc:
        return cfg.problem, EXIT_CONVERGED, f"skipped: {exc}"
    except (BlockryError, OSError) as exc:
        return cfg.problem, EXIT_ERROR, str(exc)


def reproduce(
    output_dir: Optional[str] = None,
    matrix: Optional[str] = None,
    max_iterations: Optional[int] = None,
) -> int:
    """
    Runs the three built-in experiments with diagnostics and verification in
    separate processes. A missing sherman4 file skips that experiment.
    """
    parent = output_dir or config.CONFIG.get("output", {}).get("directory", "blockry-out")
    configs = []
    for name in ExperimentName:
        kwargs = dict(
            problem=name.value,
            matrix=matrix,
            output_dir=os.path.join(parent, name.value),
            emit_fom=True,
            verify=True,
            progress=False,
        )
        if max_iterations is not None:
            kwargs["max_iterations"] = max_iterations
        configs.append(RunConfig(**kwargs))

    code = EXIT_CONVERGED
    for problem, exit_code, message in run_in_processes(_reproduce_one, configs):
        if message:
            logger.warning("%s: %s", problem, message)
        logger.info("%s: exit code %d", problem, exit_code)
        if exit_code == EXIT_ERROR or code == EXIT_ERROR:
            code = EXIT_ERROR
        else:
            code = max(code, exit_code)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        set_log_level(logging.DEBUG)
    elif args.quiet:
        set_log_level(logging.WARNING)

    try:
        if args.command == "run":
            cfg = _config_from_args(
                args,
                output_dir=args.out,
                emit_fom=args.emit_fom,
                diagnostics=args.diagnostics,
                verify=args.verify,
                plot=not args.no_plot,
            )
            return run(cfg)
        if args.command == "inspect":
            cfg = _config_from_args(args, progress=False)
            return inspect(cfg, args.at, as_json=args.json)
        return reproduce(args.out, args.matrix, args.max_iter)
    except (BlockryError, OSError, ValueError) as exc:
        print(f"blockry: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


__all__ = [
    "EXIT_BUDGET",
    "EXIT_CONVERGED",
    "EXIT_ERROR",
    "IterationRecord",
    "RunConfig",
    "RunResult",
    "build_parser",
    "csv_header",
    "execute",
    "inspect",
    "main",
    "replay",
    "reproduce",
    "run",
]
