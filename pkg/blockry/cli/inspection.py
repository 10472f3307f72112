import sys
from typing import IO, Dict, Optional

import numpy as np

from ..diagnostics import classify
from ..exceptions import ContractError
from ..kernels import canonical_sign_form
from ..solvers import IterationSnapshot, solve
from ..utils.serialization import to_json
from .run import RunConfig, resolve_problem

MATRIX_NAMES = ("c_tilde", "c", "c_hat", "n", "n_hat")


def replay(cfg: RunConfig, j: int) -> IterationSnapshot:
    """
    Re-runs the solve of `cfg` up to iteration j.

    Raises:
        ContractError: if the run ends (converges or exhausts the Krylov
            space) before iteration j.
    """
    if j < 1:
        raise ContractError(f"iteration must be >= 1, got {j}")
    problem = resolve_problem(cfg)
    last = None
    for snapshot in solve(
        problem.operator,
        problem.b,
        problem.x0,
        max_iterations=j,
        tolerance=cfg.tolerance,
        rng_seed=cfg.seed,
        with_fom=False,
    ):
        last = snapshot
    if last is None or last.j < j:
        ended = 0 if last is None else last.j
        raise ContractError(f"iteration {j} beyond run length ({ended} iterations)")
    return last


def iteration_matrices(snapshot: IterationSnapshot) -> Dict[str, np.ndarray]:
    blk = snapshot.fact.at(snapshot.j)
    return {
        "c_tilde": blk.c_tilde,
        "c": blk.c,
        "c_hat": blk.c_hat,
        "n": blk.n,
        "n_hat": blk.n_hat,
    }


def _format_matrix(matrix: np.ndarray) -> str:
    return np.array2string(
        np.asarray(matrix), precision=17, floatmode="maxprec", suppress_small=False, max_line_width=200
    )


def inspect(cfg: RunConfig, j: int, as_json: bool = False, stream: Optional[IO[str]] = None) -> int:
    """
    Prints C~_j, C_j, C^_j, N_j and N^_j of iteration j, each in full precision
    and in its canonical sign form.
    """
    stream = sys.stdout if stream is None else stream
    snapshot = replay(cfg, j)
    report = classify(snapshot.state, snapshot.fact, j)
    matrices = iteration_matrices(snapshot)

    if as_json:
        stream.write(
            to_json(
                {
                    "j": j,
                    "rank_r": report.rank_r,
                    "case": report.case,
                    "stagnated_columns": report.stagnated_columns,
                    "matrices": matrices,
                    "canonical": {k: canonical_sign_form(v) for k, v in matrices.items()},
                }
            )
        )
        stream.write("\n")
        return 0

    stream.write(f"iteration {j}: rank r = {report.rank_r}, case {report.case.value}\n")
    if report.stagnated_columns:
        cols = ", ".join(str(c + 1) for c in report.stagnated_columns)
        stream.write(f"stagnated columns: {cols}\n")
    for name in MATRIX_NAMES:
        stream.write(f"\n{name}_{j} =\n{_format_matrix(matrices[name])}\n")
        stream.write(f"{name}_{j} (canonical signs) =\n{_format_matrix(canonical_sign_form(matrices[name]))}\n")
    return 0
