"""
Stagnation analysis of block GMRES and generalized block FOM.

Every function reads a finished iteration of a `GmresFactorization` (and,
where dense quantities are needed, the matching `BlockArnoldiState`) and never
modifies it. Verification functions return relative Frobenius residuals of
identities that hold in exact arithmetic.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from . import config
from ._logging import get_logger
from .arnoldi import BlockArnoldiState
from .data import StagnationCase
from .exceptions import ContractError, SingularRelationError
from .kernels import (
    CsDecomposition,
    cs_decompose,
    frozen,
    numerical_rank,
    orthonormal_basis,
    principal_angles,
)
from .solvers import (
    GmresFactorization,
    IteratePair,
    gmres_solution_at,
    progressive_updates,
    solve_upper_deflated,
)

logger = get_logger("diagnostics")

VERIFICATION_WARN_LEVEL = 1e-8


@dataclass(frozen=True)
class StagnationReport:
    """
    Classification of iteration j.

    stagnated_columns are 0-based indices of the vanishing columns of C_j;
    principal_angles_vs_constraint are the CS angles of the iteration's
    orthogonal transformation, ascending.
    """

    iteration: int
    rank_r: int
    case: StagnationCase
    stagnated_columns: Tuple[int, ...]
    cs: CsDecomposition
    principal_angles_vs_constraint: np.ndarray
    intersection_dim: int
    breakdown_p: int


@dataclass(frozen=True)
class RankStructure:
    """H^_jj = m_hat @ y2 and Z_j = R_{j-1} @ y1."""

    m_hat: np.ndarray
    y2: np.ndarray
    y1: np.ndarray

    @property
    def rank_r(self) -> int:
        return self.m_hat.shape[1]


@dataclass(frozen=True)
class TransformProperties:
    """
    Checks on the orthogonal transformation of one iteration.

    q12_residual is ||Q12 - N^-T H_{j+1,j}^T||_F, None when H_{j+1,j} is singular.
    """

    q12_residual: Optional[float]
    q12_rank: int
    q11_rank: int
    rank_r: int

    @property
    def q11_rank_matches(self) -> bool:
        return self.q11_rank == self.rank_r


@dataclass(frozen=True)
class IterationDiagnostics:
    report: StagnationReport
    initial_sines: np.ndarray
    transform: TransformProperties
    trig_residual: Optional[float] = None
    gap_residual: Optional[float] = None
    nilpotent_residual: Optional[float] = None
    angle_deviation: Optional[float] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)


def _relative(residual: np.ndarray, scale: float) -> float:
    norm = float(np.linalg.norm(residual))
    if scale == 0.0:
        return 0.0 if norm == 0.0 else float("inf")
    return norm / scale


def _check_iteration(fact: GmresFactorization, j: int, minimum: int = 1):
    if not minimum <= j <= fact.iteration:
        raise ContractError(f"iteration {j} outside {minimum}..{fact.iteration}")


def _rank_reference(fact: GmresFactorization, j: int) -> float:
    return float(np.linalg.norm(fact.at(j).n, 2))


def stagnated_columns(fact: GmresFactorization, j: int, tol: Optional[float] = None) -> Tuple[int, ...]:
    """0-based indices of the columns of C_j with norm <= tol * ||S0||."""
    _check_iteration(fact, j)
    tol = config.numerics("stagnation_tol", tol)
    bound = tol * float(np.linalg.norm(fact.s0, 2))
    norms = np.linalg.norm(fact.at(j).c, axis=0)
    return tuple(int(i) for i in np.flatnonzero(norms <= bound))


def intersection_dim(
    state: BlockArnoldiState,
    fact: GmresFactorization,
    j: int,
    tol: Optional[float] = None,
) -> int:
    """
    Dimension of the part of R(V_j) that the GMRES update X_j - X_{j-1}
    reaches: the number of principal angles between the update range and
    R(V_j) whose cosine exceeds `tol` (`numerics.intersection_tol`).
    Deflated columns of V_j are left out.
    """
    _check_iteration(fact, j)
    tol = config.numerics("intersection_tol", tol)
    s_gmres, _ = progressive_updates(fact, j)
    update = state.w(j) @ s_gmres
    basis = orthonormal_basis(update, reference=float(np.linalg.norm(fact.s0, 2)))
    v_j = state.block(j)
    angles = principal_angles(basis, v_j[:, np.any(v_j != 0.0, axis=0)])
    return int(np.count_nonzero(np.cos(angles) > tol))


def classify(state: BlockArnoldiState, fact: GmresFactorization, j: int) -> StagnationReport:
    """
    Classifies iteration j by r = rank(N^_j):

    - r = L: the FOM iterate exists (FomExists),
    - 0 < r < L: only an r-dimensional part of V_j enters the update,
    - r = 0: block GMRES stagnates totally.

    Without an earlier breakdown the intersection dimension equals r; a
    mismatch is logged, not raised.
    """
    _check_iteration(fact, j)
    blk = fact.at(j)
    size = fact.block_size
    rank_r = blk.rank_r
    if rank_r == size:
        case = StagnationCase.FOM_EXISTS
    elif rank_r == 0:
        case = StagnationCase.TOTAL_STAGNATION
    else:
        case = StagnationCase.PARTIAL_CONTRIBUTION

    cs = cs_decompose(blk.transform)
    dim = intersection_dim(state, fact, j)
    if dim != rank_r and not state.breakdown_before(j):
        logger.warning(
            "iteration %d: intersection dimension %d differs from rank %d", j, dim, rank_r
        )
    report = StagnationReport(
        iteration=j,
        rank_r=rank_r,
        case=case,
        stagnated_columns=stagnated_columns(fact, j),
        cs=cs,
        principal_angles_vs_constraint=frozen(np.sort(cs.angles)),
        intersection_dim=dim,
        breakdown_p=state.breakdown_at(j),
    )
    logger.debug("iteration %d: %s, r=%d", j, case.value, rank_r)
    return report


def hessenberg_rank_structure(fact: GmresFactorization, j: int) -> RankStructure:
    """
    Rank-r factors of the transformed diagonal block, H^_jj = M^ Y2, and
    Y1 = R_{j-1}^{-1} Z_j ((j-1)L x L, empty for j = 1).
    """
    _check_iteration(fact, j)
    blk = fact.at(j)
    size = fact.block_size
    if j == 1:
        y1 = np.zeros((0, size))
    else:
        y1 = solve_upper_deflated(fact.r(j - 1), blk.z, f"R_{j - 1}")
    return RankStructure(m_hat=blk.m_hat, y2=blk.y2, y1=frozen(y1))


def _relation_factor(fact: GmresFactorization, j: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Returns (Q, C^, cs) with Q = M^^T V1 for an iteration of full rank r = L.
    """
    blk = fact.at(j)
    size = fact.block_size
    if blk.rank_r < size:
        raise SingularRelationError(blk.rank_r, size)
    cs = cs_decompose(blk.transform)
    q = blk.m_hat.T @ cs.v1
    return q, blk.c_hat, cs


def verify_trig_relation(
    pair: IteratePair, x_prev_gmres, fact: GmresFactorization
) -> float:
    """
    Residual of X^G = X^F K + X^G_{j-1} (I - K) with
    K = C^^-1 Q C^2 Q^T C^, relative to ||X^G||_F.

    For L = 1 this is x^G = c^2 x^F + s^2 x^G_{j-1}.

    Raises:
        SingularRelationError: if r < L or C^_j is singular.
    """
    j = pair.j
    _check_iteration(fact, j)
    if pair.x_fom is None:
        raise ContractError("pair carries no FOM iterate")
    q, c_hat, cs = _relation_factor(fact, j)
    size = fact.block_size
    c_hat_rank = numerical_rank(c_hat, reference=float(np.linalg.norm(fact.s0, 2)))
    if c_hat_rank < size:
        raise SingularRelationError(c_hat_rank, size)
    middle = q @ np.diag(cs.cosines**2) @ q.T @ c_hat
    k = np.linalg.solve(c_hat, middle)
    x_prev = np.asarray(x_prev_gmres, dtype=np.float64)
    residual = pair.x_gmres - pair.x_fom @ k - x_prev @ (np.eye(size) - k)
    value = _relative(residual, float(np.linalg.norm(pair.x_gmres)))
    if value > VERIFICATION_WARN_LEVEL:
        logger.warning("iteration %d: trig relation residual %.3e", j, value)
    return value


def verify_breakdown_gap(
    state: BlockArnoldiState, pair: IteratePair, fact: GmresFactorization
) -> float:
    """
    Residual of X^F - X^G = W_j [-Y1; I] Y2^-1 Q S^2 Q^T C^_j relative to
    ||X^G||_F.

    The identity needs only r = L; after a breakdown it replaces the trig
    relation, whose C^_j may be singular.

    Raises:
        SingularRelationError: if Y2 is singular (r < L).
    """
    j = pair.j
    _check_iteration(fact, j)
    if pair.x_fom is None:
        raise ContractError("pair carries no FOM iterate")
    if not state.breakdown_before(j):
        logger.debug("iteration %d: gap identity checked without an earlier breakdown", j)
    q, c_hat, cs = _relation_factor(fact, j)
    structure = hessenberg_rank_structure(fact, j)
    inner = scipy.linalg.solve_triangular(
        structure.y2, q @ np.diag(cs.sines**2) @ q.T @ c_hat, lower=False
    )
    coords = np.vstack([-structure.y1 @ inner, inner])
    predicted = state.w(j) @ coords
    gap = pair.x_fom - pair.x_gmres
    value = _relative(gap - predicted, float(np.linalg.norm(pair.x_gmres)))
    if value > VERIFICATION_WARN_LEVEL:
        logger.warning("iteration %d: breakdown gap residual %.3e", j, value)
    return value


def verify_nilpotent_split(state: BlockArnoldiState, fact: GmresFactorization, j: int) -> float:
    """
    Splits the GMRES update S = X_j - X_{j-1} into S2 = V_j V_j^T S and
    S1 = S - S2 and returns the residual of S1 = -W_{j-1} Y1 V_j^T S2,
    relative to ||S||_F. Zero when the update vanishes.
    """
    _check_iteration(fact, j, minimum=2)
    s_gmres, _ = progressive_updates(fact, j)
    update = state.w(j) @ s_gmres
    v_j = state.block(j)
    s2 = v_j @ (v_j.T @ update)
    s1 = update - s2
    y1 = hessenberg_rank_structure(fact, j).y1
    predicted = -state.w(j - 1) @ (y1 @ (v_j.T @ s2))
    scale = float(np.linalg.norm(update))
    if scale == 0.0 and float(np.linalg.norm(predicted)) == 0.0:
        return 0.0
    value = _relative(s1 - predicted, scale)
    if value > VERIFICATION_WARN_LEVEL:
        logger.warning("iteration %d: nilpotent split residual %.3e", j, value)
    return value


def constraint_angle_deviation(
    state: BlockArnoldiState, fact: GmresFactorization, j: int
) -> Optional[float]:
    """
    Largest difference between the CS cosines of iteration j and the cosines
    of the principal angles between R(B - A X_{j-1}) and A R(W_j), both
    computed from dense bases.

    Returns None when the residual block is rank deficient (converged
    columns) or the Krylov space is exhausted.
    """
    _check_iteration(fact, j)
    if state.exhausted and j == state.iteration:
        return None
    size = fact.block_size
    x_prev = gmres_solution_at(state, fact, j - 1)
    residual = state.rhs - state.operator.apply(x_prev)
    reference = float(np.linalg.norm(fact.s0, 2))
    residual_basis = orthonormal_basis(residual, reference=reference)
    if residual_basis.shape[1] < size:
        return None
    image = state.operator.apply(state.w(j))
    image_basis = orthonormal_basis(image)
    explicit = np.sort(np.cos(principal_angles(residual_basis, image_basis)))
    cs = cs_decompose(fact.at(j).transform)
    return float(np.max(np.abs(explicit - cs.cosines)))


def angles_vs_constraint_space(
    state: BlockArnoldiState, fact: GmresFactorization, j: int
) -> np.ndarray:
    """
    Principal angles (ascending) between the range of the residual block
    B - A X_{j-1} and the constraint space A K_j, read off the CS cosines of
    the iteration's orthogonal transformation. The dense comparison is logged
    when it deviates by more than `numerics.orthogonality_tol`.
    """
    _check_iteration(fact, j)
    cs = cs_decompose(fact.at(j).transform)
    deviation = constraint_angle_deviation(state, fact, j)
    if deviation is not None and deviation > config.numerics("orthogonality_tol"):
        logger.warning("iteration %d: CS cosines deviate from principal angles by %.3e", j, deviation)
    return frozen(np.sort(cs.angles))


def initial_residual_sines(fact: GmresFactorization, j: int) -> np.ndarray:
    """
    Sines of the principal angles between R(F0) and A K_j: the singular values
    (descending) of Q21^(j) ... Q21^(1).
    """
    _check_iteration(fact, j)
    product = np.eye(fact.block_size)
    for blk in fact.blocks[:j]:
        product = blk.q21 @ product
    return frozen(scipy.linalg.svdvals(product))


def verify_orthogonal_transform_properties(
    fact: GmresFactorization, j: int
) -> TransformProperties:
    """
    Q12 = N_j^-T H_{j+1,j}^T whenever H_{j+1,j} is nonsingular, and
    rank Q11 = r.
    """
    _check_iteration(fact, j)
    blk = fact.at(j)
    size = fact.block_size
    reference = _rank_reference(fact, j)
    h_sub_rank = numerical_rank(blk.h_sub, reference=reference)
    q12_residual = None
    if h_sub_rank == size:
        predicted = scipy.linalg.solve_triangular(blk.n, blk.h_sub.T, trans="T", lower=False)
        q12_residual = float(np.linalg.norm(blk.q12 - predicted))
    return TransformProperties(
        q12_residual=q12_residual,
        q12_rank=numerical_rank(blk.q12),
        q11_rank=numerical_rank(blk.q11, reference=1.0),
        rank_r=blk.rank_r,
    )


def analyze(
    state: BlockArnoldiState,
    fact: GmresFactorization,
    pair: IteratePair,
    x_prev=None,
    verify: bool = True,
) -> IterationDiagnostics:
    """
    Full diagnostics of the iteration of `pair`: the stagnation report, the
    initial-residual sines and, with `verify`, every identity whose
    preconditions hold.

    Args:
        x_prev: X^G_{j-1}; computed from the factorization when omitted.
    """
    j = pair.j
    report = classify(state, fact, j)
    diag = IterationDiagnostics(
        report=report,
        initial_sines=initial_residual_sines(fact, j),
        transform=verify_orthogonal_transform_properties(fact, j),
    )
    if not verify:
        return diag

    notes = []
    trig = gap = nilpotent = None
    if x_prev is None:
        x_prev = gmres_solution_at(state, fact, j - 1)
    if report.rank_r == fact.block_size and pair.x_fom is not None:
        if state.breakdown_before(j):
            gap = verify_breakdown_gap(state, pair, fact)
        else:
            try:
                trig = verify_trig_relation(pair, x_prev, fact)
            except SingularRelationError as exc:
                notes.append(str(exc))
    if j >= 2:
        nilpotent = verify_nilpotent_split(state, fact, j)
    deviation = constraint_angle_deviation(state, fact, j)
    if deviation is not None and deviation > config.numerics("orthogonality_tol"):
        logger.warning("iteration %d: CS cosines deviate from principal angles by %.3e", j, deviation)
    return IterationDiagnostics(
        report=report,
        initial_sines=diag.initial_sines,
        transform=diag.transform,
        trig_residual=trig,
        gap_residual=gap,
        nilpotent_residual=nilpotent,
        angle_deviation=deviation,
        notes=tuple(notes),
    )
