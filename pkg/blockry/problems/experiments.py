"""
The built-in experiments and loading of user problems from Matrix Market files.
"""

import os
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .. import config
from .._logging import get_logger
from ..arnoldi import BlockOperator
from ..data import ExperimentName
from ..exceptions import ContractError, ProblemFileNotFoundError
from ..kernels import frozen
from .generators import block_diagonal, seeded_vector, shift_matrix, unit_vectors
from .matrix_market import read_matrix_market

logger = get_logger("problems")

SHERMAN4_URL = "https://sparse.tamu.edu/HB/sherman4"
SHERMAN4_FILE = "sherman4.mtx"
SHERMAN4_RHS_FILE = "sherman4_rhs1.mtx"
SHERMAN4_RANDOM_NORM = 1e7


@dataclass(frozen=True)
class ProblemSpec:
    """
    A linear system A X = B with initial guess X0.

    expected_events holds (iteration, description) annotations observed for
    the built-in experiments with the default seed; `notes` records
    substitutions such as a random stand-in for a missing right-hand side.
    """

    operator: BlockOperator
    b: np.ndarray
    x0: np.ndarray
    label: str
    expected_events: Tuple[Tuple[int, str], ...] = field(default_factory=tuple)
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.b.shape[0] != self.operator.dimension:
            raise ContractError(
                f"b has {self.b.shape[0]} rows, operator dimension is {self.operator.dimension}"
            )
        if self.x0.shape != self.b.shape:
            raise ContractError(f"x0 has shape {self.x0.shape}, expected {self.b.shape}")

    @property
    def n(self) -> int:
        return self.operator.dimension

    @property
    def block_size(self) -> int:
        return self.b.shape[1]


def _spec(operator, b, label, events=(), notes=()) -> ProblemSpec:
    return ProblemSpec(
        operator=operator,
        b=frozen(b),
        x0=frozen(np.zeros_like(b)),
        label=label,
        expected_events=tuple(events),
        notes=tuple(notes),
    )


def total_stagnation_problem() -> ProblemSpec:
    """Shift matrix n = 200 with B = [e1, e50, e100, e150]."""
    return _spec(
        shift_matrix(200),
        unit_vectors(200, 1, 50, 100, 150),
        ExperimentName.TOTAL_STAG.value,
        events=((49, "column 2 converges, breakdown p=1"), (50, "Krylov space exhausted")),
    )


def partial_stagnation_problem() -> ProblemSpec:
    """Shift matrix n = 30 with B = [e1, e25]."""
    return _spec(
        shift_matrix(30),
        unit_vectors(30, 1, 25),
        ExperimentName.PARTIAL_STAG.value,
        events=((6, "column 1 converges, breakdown p=1"), (15, "column 2 converges")),
    )


def _require_file(path: str, hint: str) -> str:
    if not os.path.isfile(path):
        raise ProblemFileNotFoundError(path, hint)
    return path


def _rhs_vector(path: str, n: int) -> np.ndarray:
    rhs = read_matrix_market(path).toarray()
    if rhs.shape[0] != n:
        raise ContractError(f"right-hand side in {path} has {rhs.shape[0]} rows, expected {n}")
    return rhs[:, 0]


def sherman4_mixed_problem(
    matrix_path: Optional[str] = None,
    rhs_path: Optional[str] = None,
    seed: Optional[int] = None,
) -> ProblemSpec:
    """
    diag(sherman4, shift(200)) with two right-hand sides. The shift block gets
    e50 and e150; the sherman4 block gets the vector shipped with the matrix
    and a seeded random vector of 2-norm 1e7.

    Without `matrix_path` the files are looked up in `config.data_dir()`.
    A missing right-hand-side file is replaced by a seeded unit-norm random
    vector and the substitution is recorded in `notes`.
    """
    seed = int(config.solver_default("seed") if seed is None else seed)
    hint = f"download {SHERMAN4_URL} and place {SHERMAN4_FILE} in {config.data_dir()}"
    if matrix_path is None:
        matrix_path = os.path.join(config.data_dir(), SHERMAN4_FILE)
    sherman = read_matrix_market(_require_file(matrix_path, hint)).to_operator()
    n = sherman.dimension

    if rhs_path is None:
        candidate = os.path.join(os.path.dirname(matrix_path), SHERMAN4_RHS_FILE)
        rhs_path = candidate if os.path.isfile(candidate) else None
    notes = []
    if rhs_path is not None:
        packaged = _rhs_vector(_require_file(rhs_path, hint), n)
    else:
        packaged = seeded_vector(n, seed + 1)
        notes.append(f"packaged right-hand side not found; seeded random vector (seed {seed + 1}) used")
        logger.warning(notes[-1])

    b = np.zeros((n + 200, 2))
    b[:n, 0] = packaged
    b[:n, 1] = seeded_vector(n, seed, SHERMAN4_RANDOM_NORM)
    b[n:] = unit_vectors(200, 50, 150)
    return _spec(
        block_diagonal(sherman, shift_matrix(200)),
        b,
        ExperimentName.SHERMAN4_MIXED.value,
        notes=notes,
    )


def builtin_experiment(
    name: Union[ExperimentName, str],
    matrix_path: Optional[str] = None,
    rhs_path: Optional[str] = None,
    seed: Optional[int] = None,
) -> ProblemSpec:
    """
    Raises:
        ValueError: for an unknown experiment name.
        ProblemFileNotFoundError: if the sherman4 file is missing.
    """
    name = ExperimentName.interfere(name)
    if name == ExperimentName.TOTAL_STAG:
        return total_stagnation_problem()
    if name == ExperimentName.PARTIAL_STAG:
        return partial_stagnation_problem()
    return sherman4_mixed_problem(matrix_path, rhs_path, seed)


def load_problem(
    path: str,
    rhs_path: Optional[str] = None,
    block_size: int = 2,
    seed: Optional[int] = None,
) -> ProblemSpec:
    """
    A problem from a Matrix Market matrix. The right-hand sides are the
    columns of `rhs_path` or, without it, a seeded standard normal n x
    block_size block.
    """
    seed = int(config.solver_default("seed") if seed is None else seed)
    operator = read_matrix_market(_require_file(path, "check the matrix path")).to_operator()
    n = operator.dimension
    notes = []
    if rhs_path is not None:
        b = read_matrix_market(_require_file(rhs_path, "check the right-hand-side path")).toarray()
        if b.shape[0] != n:
            raise ContractError(f"right-hand side has {b.shape[0]} rows, expected {n}")
    else:
        if not 1 <= block_size <= n:
            raise ContractError(f"block size must be in 1..{n}, got {block_size}")
        b = np.random.default_rng(seed).standard_normal((n, block_size))
        notes.append(f"random right-hand sides (seed {seed})")
    return _spec(operator, b, os.path.basename(path), notes=notes)
