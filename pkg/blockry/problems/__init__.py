from .experiments import (
    ProblemSpec,
    builtin_experiment,
    load_problem,
    partial_stagnation_problem,
    sherman4_mixed_problem,
    total_stagnation_problem,
)
from .generators import block_diagonal, seeded_vector, shift_matrix, unit_vectors
from .matrix_market import (
    MatrixMarketMatrix,
    parse_matrix_market,
    read_matrix_market,
    write_matrix_market,
)

__all__ = [
    "ProblemSpec",
    "builtin_experiment",
    "load_problem",
    "partial_stagnation_problem",
    "sherman4_mixed_problem",
    "total_stagnation_problem",
    "block_diagonal",
    "seeded_vector",
    "shift_matrix",
    "unit_vectors",
    "MatrixMarketMatrix",
    "parse_matrix_market",
    "read_matrix_market",
    "write_matrix_market",
]
