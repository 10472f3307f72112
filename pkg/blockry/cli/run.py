"""
The `run` command: solve a problem, collect one IterationRecord per
iteration and write iterations.csv, summary.txt, summary.json and plot.gp.
"""

import os
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

from .. import config
from .._logging import get_logger
from ..arnoldi import BreakdownEvent
from ..data import ExperimentName
from ..diagnostics import analyze
from ..exceptions import ContractError
from ..problems import ProblemSpec, builtin_experiment, load_problem
from ..solvers import solve
from ..utils.progress import IterationTqdm, TqdmState
from ..utils.serialization import to_json
from .records import IterationRecord, build_record, format_float, write_csv

logger = get_logger("cli")

EXIT_CONVERGED = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2


@dataclass(frozen=True)
class RunConfig:
    """
    Settings of one run. `problem` is a built-in experiment name or the path
    of a Matrix Market matrix; `verify` implies `diagnostics`.
    """

    problem: str
    rhs: Optional[str] = None
    matrix: Optional[str] = None
    block_size: int = 2
    max_iterations: int = field(default_factory=lambda: int(config.solver_default("max_iterations")))
    tolerance: float = field(default_factory=lambda: float(config.solver_default("tolerance")))
    seed: int = field(default_factory=lambda: int(config.solver_default("seed")))
    output_dir: Optional[str] = None
    emit_fom: bool = False
    diagnostics: bool = False
    verify: bool = False
    plot: bool = True
    progress: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ContractError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.tolerance > 0:
            raise ContractError(f"tolerance must be positive, got {self.tolerance}")
        if self.block_size < 1:
            raise ContractError(f"block size must be >= 1, got {self.block_size}")

    @property
    def with_diagnostics(self) -> bool:
        return self.diagnostics or self.verify

    @property
    def resolved_output_dir(self) -> str:
        if self.output_dir is not None:
            return self.output_dir
        name = os.path.splitext(os.path.basename(self.problem))[0]
        return os.path.join(config.CONFIG.get("output", {}).get("directory", "blockry-out"), name)


@dataclass(frozen=True)
class RunResult:
    problem: ProblemSpec
    records: Tuple[IterationRecord, ...]
    breakdowns: Tuple[BreakdownEvent, ...]
    converged: bool
    column_convergence: Tuple[Optional[int], ...]
    exhausted: bool

    @property
    def exit_code(self) -> int:
        return EXIT_CONVERGED if self.converged else EXIT_BUDGET

    @property
    def max_verification_residual(self) -> Optional[float]:
        values = [v for record in self.records for v in record.verification_residuals()]
        return max(values) if values else None


def resolve_problem(cfg: RunConfig) -> ProblemSpec:
    """A built-in experiment when `cfg.problem` names one, a Matrix Market problem otherwise."""
    try:
        name = ExperimentName.interfere(cfg.problem)
    except ValueError:
        return load_problem(cfg.problem, cfg.rhs, cfg.block_size, cfg.seed)
    return builtin_experiment(name, matrix_path=cfg.matrix, rhs_path=cfg.rhs, seed=cfg.seed)


def execute(
    cfg: RunConfig,
    progress_callback: Optional[Callable[[TqdmState], None]] = None,
) -> RunResult:
    """
    Runs the solver and collects the records without writing anything.
    """
    problem = resolve_problem(cfg)
    size = problem.block_size
    records: List[IterationRecord] = []
    first_converged: List[Optional[int]] = [None] * size
    converged = False
    state = None
    x_prev = problem.x0

    with IterationTqdm(
        total=cfg.max_iterations,
        desc=problem.label,
        disable=not cfg.progress,
        broadcast_func=progress_callback,
    ) as bar:
        for snapshot in solve(
            problem.operator,
            problem.b,
            problem.x0,
            max_iterations=cfg.max_iterations,
            tolerance=cfg.tolerance,
            rng_seed=cfg.seed,
            with_fom=cfg.emit_fom or cfg.with_diagnostics,
        ):
            state = snapshot.state
            pair = snapshot.pair
            diagnostics = None
            if cfg.with_diagnostics:
                diagnostics = analyze(state, snapshot.fact, pair, x_prev, verify=cfg.verify)
            record = build_record(snapshot, diagnostics)
            if not cfg.emit_fom:
                record = replace(record, fom_res=None, fom_generalized=None)
            records.append(record)

            for col, value in enumerate(pair.gmres_relative):
                if first_converged[col] is None and value <= cfg.tolerance:
                    first_converged[col] = snapshot.j
                    logger.info("column %d converged at iteration %d", col + 1, snapshot.j)
            converged = bool(pair.gmres_relative.max() <= cfg.tolerance)
            x_prev = pair.x_gmres
            bar.update(1)
            bar.set_postfix(res=f"{pair.gmres_relative.max():.2e}")

    return RunResult(
        problem=problem,
        records=tuple(records),
        breakdowns=() if state is None else state.breakdown_log,
        converged=converged,
        column_convergence=tuple(first_converged),
        exhausted=False if state is None else state.exhausted,
    )


def summary_text(cfg: RunConfig, result: RunResult) -> str:
    lines = [
        f"problem: {result.problem.label}",
        f"n: {result.problem.n}",
        f"block size: {result.problem.block_size}",
        f"iterations: {len(result.records)}",
        f"tolerance: {format_float(cfg.tolerance)}",
        f"status: {'converged' if result.converged else 'not converged'}",
    ]
    for col, j in enumerate(result.column_convergence, start=1):
        lines.append(
            f"column {col}: " + (f"converged at iteration {j}" if j is not None else "not converged")
        )
    if result.breakdowns:
        for event in result.breakdowns:
            text = f"breakdown at iteration {event.iteration}: p={event.p}"
            text += ", columns " + ",".join(str(c + 1) for c in event.replaced_columns)
            if event.exhausted:
                text += ", Krylov space exhausted"
            lines.append(text)
    else:
        lines.append("breakdowns: none")
    residual = result.max_verification_residual
    lines.append(
        "max verification residual: " + (format_float(residual) if residual is not None else "n/a")
    )
    for note in result.problem.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def summary_dict(cfg: RunConfig, result: RunResult) -> Dict:
    return {
        "config": cfg,
        "problem": result.problem.label,
        "n": result.problem.n,
        "block_size": result.problem.block_size,
        "converged": result.converged,
        "column_convergence": result.column_convergence,
        "breakdowns": result.breakdowns,
        "max_verification_residual": result.max_verification_residual,
        "notes": result.problem.notes,
        "records": result.records,
    }


def plot_script(block_size: int) -> str:
    """gnuplot script drawing residual norms and sines from iterations.csv."""
    res_cols = ", ".join(
        f"'iterations.csv' using 1:{1 + i} with lines title 'gmres column {i}'"
        for i in range(1, block_size + 1)
    )
    sin_start = 1 + 2 * block_size + 4
    sin_cols = ", ".join(
        f"'iterations.csv' using 1:(column({sin_start + i})**2) with lines title 's_{i}^2'"
        for i in range(1, block_size + 1)
    )
    return "\n".join(
        [
            "set datafile separator ','",
            "set key autotitle columnhead",
            "set terminal pngcairo size 1200,500",
            "set output 'iterations.png'",
            "set multiplot layout 1,2",
            "set logscale y",
            "set xlabel 'iteration'",
            "set ylabel 'relative residual'",
            f"plot {res_cols}",
            "unset logscale y",
            "set yrange [0:1.05]",
            "set ylabel 'squared sines'",
            f"plot {sin_cols}",
            "unset multiplot",
            "",
        ]
    )


def write_artifacts(cfg: RunConfig, result: RunResult) -> str:
    out = cfg.resolved_output_dir
    os.makedirs(out, exist_ok=True)
    size = result.problem.block_size
    with open(os.path.join(out, "iterations.csv"), "w", newline="") as f:
        write_csv(f, result.records, size)
    with open(os.path.join(out, "summary.txt"), "w") as f:
        f.write(summary_text(cfg, result))
    with open(os.path.join(out, "summary.json"), "w") as f:
        f.write(to_json(summary_dict(cfg, result)))
    if cfg.plot:
        with open(os.path.join(out, "plot.gp"), "w") as f:
            f.write(plot_script(size))
    logger.info("wrote results to %s", out)
    return out


def _log_progress(state: TqdmState):
    logger.debug("progress %s/%s after %.2fs", state.get("n"), state.get("total"), state.get("elapsed", 0.0))


def run(cfg: RunConfig) -> int:
    """
    Runs and writes the artifacts. Returns 0 on convergence and 2 when the
    iteration budget (or the Krylov space) ran out first; errors propagate.
    """
    result = execute(cfg, progress_callback=_log_progress)
    write_artifacts(cfg, result)
    if not result.converged:
        logger.warning(
            "not converged after %d iterations%s",
            len(result.records),
            " (Krylov space exhausted)" if result.exhausted else "",
        )
    return result.exit_code
