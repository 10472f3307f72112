__version__ = "0.1.0"

from .exceptions import (
    BlockryError,
    ContractError,
    DegenerateBasisError,
    MatrixMarketError,
    MatrixMarketParseError,
    OperatorRangeExhaustedError,
    ProblemFileNotFoundError,
    RankDeficientResidualError,
    SingularRelationError,
    UnsupportedFormatError,
)
from .kernels import (
    CsDecomposition,
    canonical_sign_form,
    cs_decompose,
    householder_qr,
    numerical_rank,
    orthonormal_basis,
    pinv_structured_upper,
    principal_angles,
    rank_revealing_factor,
    sign_equivalent,
    svd,
)
from .arnoldi import (
    BlockArnoldiState,
    BlockDiagonalOperator,
    BlockOperator,
    BreakdownEvent,
    DenseOperator,
    SparseOperator,
    initialize,
    step,
)
from .solvers import (
    FomIterate,
    GmresFactorization,
    IteratePair,
    IterationSnapshot,
    advance_factorization,
    explicit_residual_norms,
    fom_iterate,
    gmres_iterate,
    iterate_pair,
    progressive_updates,
    solve,
    start_factorization,
)
from .diagnostics import (
    StagnationReport,
    analyze,
    angles_vs_constraint_space,
    classify,
    hessenberg_rank_structure,
    initial_residual_sines,
    verify_breakdown_gap,
    verify_nilpotent_split,
    verify_orthogonal_transform_properties,
    verify_trig_relation,
)
from .problems import (
    ProblemSpec,
    block_diagonal,
    builtin_experiment,
    load_problem,
    parse_matrix_market,
    shift_matrix,
    write_matrix_market,
)
from .data import DataEnum, ExperimentName, StagnationCase
from ._logging import BLOCKRY_LOGGER, get_logger, set_log_format, set_log_level
from .utils.serialization import JSONEncoder, Encdata, to_json

from . import config

__all__ = [
    "BlockryError",
    "ContractError",
    "DegenerateBasisError",
    "MatrixMarketError",
    "MatrixMarketParseError",
    "OperatorRangeExhaustedError",
    "ProblemFileNotFoundError",
    "RankDeficientResidualError",
    "SingularRelationError",
    "UnsupportedFormatError",
    "CsDecomposition",
    "canonical_sign_form",
    "cs_decompose",
    "householder_qr",
    "numerical_rank",
    "orthonormal_basis",
    "pinv_structured_upper",
    "principal_angles",
    "rank_revealing_factor",
    "sign_equivalent",
    "svd",
    "BlockArnoldiState",
    "BlockDiagonalOperator",
    "BlockOperator",
    "BreakdownEvent",
    "DenseOperator",
    "SparseOperator",
    "initialize",
    "step",
    "GmresFactorization",
    "IteratePair",
    "IterationSnapshot",
    "advance_factorization",
    "explicit_residual_norms",
    "fom_iterate",
    "FomIterate",
    "gmres_iterate",
    "iterate_pair",
    "progressive_updates",
    "solve",
    "start_factorization",
    "StagnationReport",
    "analyze",
    "angles_vs_constraint_space",
    "classify",
    "hessenberg_rank_structure",
    "initial_residual_sines",
    "verify_breakdown_gap",
    "verify_nilpotent_split",
    "verify_orthogonal_transform_properties",
    "verify_trig_relation",
    "ProblemSpec",
    "block_diagonal",
    "builtin_experiment",
    "load_problem",
    "parse_matrix_market",
    "shift_matrix",
    "write_matrix_market",
    "DataEnum",
    "ExperimentName",
    "StagnationCase",
    "BLOCKRY_LOGGER",
    "get_logger",
    "set_log_format",
    "set_log_level",
    "JSONEncoder",
    "Encdata",
    "to_json",
    "config",
]
