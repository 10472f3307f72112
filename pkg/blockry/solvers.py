"""
Block GMRES and (generalized) block FOM on top of the block Arnoldi state.

The block Hessenberg matrix is reduced progressively: at iteration j the
stored 2L x 2L transformations of the earlier iterations are applied to the
new block column, and a new transformation annihilates H_{j+1,j} below the
transformed diagonal block. The transformed right-hand side then yields the
GMRES coordinates by back substitution, and the same blocks yield the
generalized FOM coordinates through a structured pseudo-inverse.
"""

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
import scipy.linalg

from . import config
from ._logging import get_logger
from .arnoldi import BlockArnoldiState, BlockOperator, initialize, step
from .exceptions import ContractError, DegenerateBasisError, OperatorRangeExhaustedError
from .kernels import (
    EPS,
    as_matrix,
    frozen,
    householder_qr,
    numerical_rank,
    pinv_structured_upper,
    rank_revealing_factor,
)

logger = get_logger("solvers")


@dataclass(frozen=True)
class IterationBlocks:
    """
    The L x L blocks produced by iteration j of the progressive QR.

    transform is the 2L x 2L orthogonal block acting on block rows j and j+1,
    with transform @ [h_hat; h_sub] = [n; 0]. z holds the transformed entries
    above the diagonal block, (j-1)L x L. c_tilde is the pending right-hand
    side block entering the iteration, c = Q11 c_tilde extends the G stack
    and c_tilde_next = Q21 c_tilde is the pending block of the next one.
    q_hat_b = [m_hat complement]^T reduces h_hat to n_hat = [y2; 0] and
    c_hat = q_hat_b c_tilde.
    """

    j: int
    transform: np.ndarray
    z: np.ndarray
    h_hat: np.ndarray
    h_sub: np.ndarray
    n: np.ndarray
    n_hat: np.ndarray
    c_tilde: np.ndarray
    c: np.ndarray
    c_hat: np.ndarray
    c_tilde_next: np.ndarray
    q_hat_b: np.ndarray
    m_hat: np.ndarray
    y2: np.ndarray

    @property
    def block_size(self) -> int:
        return self.n.shape[0]

    @property
    def rank_r(self) -> int:
        return self.m_hat.shape[1]

    @property
    def q11(self) -> np.ndarray:
        size = self.block_size
        return self.transform[:size, :size]

    @property
    def q12(self) -> np.ndarray:
        size = self.block_size
        return self.transform[:size, size:]

    @property
    def q21(self) -> np.ndarray:
        size = self.block_size
        return self.transform[size:, :size]

    @property
    def q22(self) -> np.ndarray:
        size = self.block_size
        return self.transform[size:, size:]


@dataclass(frozen=True)
class GmresFactorization:
    """
    Progressive QR of the block Hessenberg matrix after `iteration` steps.

    r_factor is the jL x jL upper triangular R_j, g the jL x L transformed
    right-hand side G_j and c_tilde_next the pending block C~_{j+1}, whose
    column norms are the GMRES residual norms.
    """

    block_size: int
    s0: np.ndarray
    blocks: Tuple[IterationBlocks, ...]
    r_factor: np.ndarray
    g: np.ndarray
    c_tilde_next: np.ndarray

    @property
    def iteration(self) -> int:
        return len(self.blocks)

    def at(self, j: int) -> IterationBlocks:
        """Blocks of iteration j (1-based)."""
        if not 1 <= j <= self.iteration:
            raise ContractError(f"iteration {j} outside 1..{self.iteration}")
        return self.blocks[j - 1]

    def r(self, j: int) -> np.ndarray:
        """R_j, the leading jL x jL part of the R-factor."""
        if not 0 <= j <= self.iteration:
            raise ContractError(f"R_{j} is not available at iteration {self.iteration}")
        return self.r_factor[: j * self.block_size, : j * self.block_size]

    def g_stack(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.iteration:
            raise ContractError(f"G_{j} is not available at iteration {self.iteration}")
        return self.g[: j * self.block_size]

    def pending(self, j: int) -> np.ndarray:
        """C~_{j+1}: the residual coordinates after iteration j."""
        if j == 0:
            return self.s0
        return self.at(j).c_tilde_next


@dataclass(frozen=True)
class IteratePair:
    """
    Block GMRES and (generalized) block FOM iterates of one iteration.

    Residual norms are per column; the relative ones are scaled by the
    column norms of F0.
    """

    j: int
    x_gmres: np.ndarray
    y_gmres: np.ndarray
    gmres_residual_norms: np.ndarray
    gmres_relative: np.ndarray
    residual_rank: int
    x_fom: Optional[np.ndarray] = None
    y_fom: Optional[np.ndarray] = None
    fom_residual_norms: Optional[np.ndarray] = None
    fom_relative: Optional[np.ndarray] = None
    fom_is_generalized: bool = False


@dataclass(frozen=True)
class FomIterate:
    """The (generalized) block FOM iterate of one iteration on its own."""

    j: int
    x_fom: np.ndarray
    y_fom: np.ndarray
    fom_residual_norms: np.ndarray
    fom_relative: np.ndarray
    fom_is_generalized: bool


@dataclass(frozen=True)
class IterationSnapshot:
    j: int
    state: BlockArnoldiState
    fact: GmresFactorization
    pair: IteratePair


def start_factorization(state: BlockArnoldiState) -> GmresFactorization:
    """The empty factorization; its pending block is S0."""
    size = state.block_size
    return GmresFactorization(
        block_size=size,
        s0=state.s0,
        blocks=(),
        r_factor=frozen(np.zeros((0, 0))),
        g=frozen(np.zeros((0, size))),
        c_tilde_next=state.s0,
    )


def apply_transforms(fact: GmresFactorization, matrix, upto: Optional[int] = None) -> np.ndarray:
    """
    Applies the transformations of iterations 1..upto (all by default) to the
    leading (upto+1)L rows of `matrix`; the remaining rows are copied.
    """
    upto = fact.iteration if upto is None else upto
    size = fact.block_size
    out = np.array(matrix, dtype=np.float64, copy=True)
    if out.shape[0] < (upto + 1) * size:
        raise ContractError(f"matrix needs at least {(upto + 1) * size} rows, has {out.shape[0]}")
    for blk in fact.blocks[:upto]:
        rows = slice((blk.j - 1) * size, (blk.j + 1) * size)
        out[rows] = blk.transform @ out[rows]
    return out


def advance_factorization(
    fact: GmresFactorization,
    new_hessenberg_column_block,
    tol_factor: Optional[float] = None,
) -> GmresFactorization:
    """
    Extends the progressive QR by the j-th block column of the Hessenberg
    matrix ((j+1)L x L, H_{j+1,j} included).

    Raises:
        ContractError: if the column has the wrong shape.
    """
    size = fact.block_size
    j = fact.iteration + 1
    col = as_matrix(new_hessenberg_column_block, "hessenberg column block")
    if col.shape != ((j + 1) * size, size):
        raise ContractError(
            f"iteration {j} needs a {(j + 1) * size}x{size} column block, got {col.shape}"
        )
    col = apply_transforms(fact, col)

    top = (j - 1) * size
    z = col[:top]
    h_hat = col[top : j * size]
    h_sub = col[j * size :]
    q, r = householder_qr(np.vstack([h_hat, h_sub]))
    transform = q.T
    n_j = r[:size]

    c_tilde = fact.c_tilde_next
    c = transform[:size, :size] @ c_tilde
    c_tilde_next = transform[size:, :size] @ c_tilde

    m_hat, y2, complement = rank_revealing_factor(
        h_hat, tol_factor, reference=float(np.linalg.norm(n_j, 2))
    )
    rank_r = m_hat.shape[1]
    q_hat_b = np.hstack([m_hat, complement]).T
    n_hat = np.zeros((size, size))
    n_hat[:rank_r] = y2

    r_factor = np.zeros((j * size, j * size))
    r_factor[:top, :top] = fact.r_factor
    r_factor[:top, top:] = z
    r_factor[top:, top:] = n_j

    blk = IterationBlocks(
        j=j,
        transform=frozen(transform),
        z=frozen(z),
        h_hat=frozen(h_hat),
        h_sub=frozen(h_sub),
        n=frozen(n_j),
        n_hat=frozen(n_hat),
        c_tilde=frozen(c_tilde),
        c=frozen(c),
        c_hat=frozen(q_hat_b @ c_tilde),
        c_tilde_next=frozen(c_tilde_next),
        q_hat_b=frozen(q_hat_b),
        m_hat=frozen(m_hat),
        y2=frozen(y2),
    )
    logger.debug("iteration %d: rank of the diagonal block %d of %d", j, rank_r, size)
    return GmresFactorization(
        block_size=size,
        s0=fact.s0,
        blocks=fact.blocks + (blk,),
        r_factor=frozen(r_factor),
        g=frozen(np.vstack([fact.g, c])),
        c_tilde_next=blk.c_tilde_next,
    )


def _check_triangular_nonsingular(r: np.ndarray, what: str):
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        return
    if diag.min() <= EPS * max(diag.max(), 1.0) * r.shape[0]:
        raise DegenerateBasisError(f"Arnoldi basis degenerate: {what} is singular")


def _solve_upper(r: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return scipy.linalg.solve_triangular(r, rhs, lower=False)


def solve_upper_deflated(r: np.ndarray, rhs: np.ndarray, what: str = "R") -> np.ndarray:
    """
    Solves R Y = rhs for upper triangular R.

    Exactly zero columns of R belong to deflated basis columns: their rows of
    Y are zero and the others are the least-squares solution over the
    remaining columns.

    Raises:
        DegenerateBasisError: if R is singular without zero columns.
    """
    live = np.any(r != 0.0, axis=0)
    if live.all():
        _check_triangular_nonsingular(r, what)
        return _solve_upper(r, rhs)
    y = np.zeros((r.shape[1], rhs.shape[1]))
    if live.any():
        y[live] = scipy.linalg.lstsq(r[:, live], rhs)[0]
    return y


def _f0_norms(fact: GmresFactorization) -> np.ndarray:
    return np.linalg.norm(fact.s0, axis=0)


def gmres_coordinates(fact: GmresFactorization, j: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Y_j^G and the part G_j - R_j Y_j^G of the transformed residual.

    Without deflated basis columns Y = R_j^{-1} G_j and the returned
    residual part is zero.

    Raises:
        DegenerateBasisError: if R_j is singular without deflated columns.
    """
    j = fact.iteration if j is None else j
    r = fact.r(j)
    g = fact.g_stack(j)
    y = solve_upper_deflated(r, g, f"R_{j}")
    if np.any(r != 0.0, axis=0).all():
        return y, np.zeros_like(g)
    return y, g - r @ y


def gmres_iterate(state: BlockArnoldiState, fact: GmresFactorization) -> IteratePair:
    """
    Block GMRES iterate X = X0 + W_j R_j^{-1} G_j.

    The residual norms are the column norms of C~_{j+1}; no product with A
    is formed. After deflation they include the least-squares remainder of
    the deflated coordinates.

    Raises:
        ContractError: before the first iteration.
        DegenerateBasisError: if R_j is singular.
    """
    j = fact.iteration
    if j == 0:
        raise ContractError("gmres_iterate needs at least one iteration")
    y, remainder = gmres_coordinates(fact, j)
    x = state.x0 + state.w(j) @ y
    norms = np.sqrt(
        np.linalg.norm(fact.c_tilde_next, axis=0) ** 2 + np.linalg.norm(remainder, axis=0) ** 2
    )
    residual_rank = numerical_rank(
        fact.c_tilde_next, reference=float(np.linalg.norm(fact.s0, 2))
    )
    return IteratePair(
        j=j,
        x_gmres=frozen(x),
        y_gmres=frozen(y),
        gmres_residual_norms=frozen(norms),
        gmres_relative=frozen(norms / _f0_norms(fact)),
        residual_rank=residual_rank,
    )


def gmres_solution_at(state: BlockArnoldiState, fact: GmresFactorization, j: int) -> np.ndarray:
    """X_j^G for any 0 <= j <= fact.iteration; X_0 is the initial guess."""
    if j == 0:
        return state.x0
    return state.x0 + state.w(j) @ gmres_coordinates(fact, j)[0]


def fom_coordinates(
    fact: GmresFactorization, tol_factor: Optional[float] = None
) -> Tuple[np.ndarray, bool]:
    """
    Coordinates of the (generalized) block FOM iterate,

        Y = [R_{j-1}^{-1} (G_{j-1} - Z_j N^+ C^), N^+ C^],   N^+ = pinv(N^_j),

    and whether N^_j is singular.
    """
    j = fact.iteration
    if j == 0:
        raise ContractError("fom_iterate needs at least one iteration")
    blk = fact.at(j)
    size = fact.block_size
    reference = float(np.linalg.norm(blk.n, 2))
    update = pinv_structured_upper(blk.n_hat, tol_factor, reference) @ blk.c_hat
    generalized = numerical_rank(blk.n_hat, tol_factor, reference) < size
    if j == 1:
        return update, generalized
    y_prev = solve_upper_deflated(
        fact.r(j - 1), fact.g_stack(j - 1) - blk.z @ update, f"R_{j - 1}"
    )
    return np.vstack([y_prev, update]), generalized


def fom_iterate(
    state: BlockArnoldiState,
    fact: GmresFactorization,
    tol_factor: Optional[float] = None,
) -> FomIterate:
    """
    (Generalized) block FOM iterate X = X0 + W_j Y.

    If N^_j is nonsingular this is the solution of H_j Y = E S0; otherwise Y
    is a least-squares solution of that system built from the pseudo-inverse
    of N^_j. Residual norms are computed in the coordinates of W_{j+1}.
    """
    j = fact.iteration
    y, generalized = fom_coordinates(fact, tol_factor)
    size = fact.block_size
    hbar = state.hbar(j)
    e_s0 = np.zeros(((j + 1) * size, size))
    e_s0[:size] = fact.s0
    residual = e_s0 - hbar @ y
    norms = np.linalg.norm(residual, axis=0)
    if generalized:
        logger.debug("iteration %d: N^ singular, generalized FOM iterate", j)
    return FomIterate(
        j=j,
        x_fom=frozen(state.x0 + state.w(j) @ y),
        y_fom=frozen(y),
        fom_residual_norms=frozen(norms),
        fom_relative=frozen(norms / _f0_norms(fact)),
        fom_is_generalized=generalized,
    )


def iterate_pair(
    state: BlockArnoldiState,
    fact: GmresFactorization,
    with_fom: bool = True,
    tol_factor: Optional[float] = None,
) -> IteratePair:
    """GMRES iterate, combined with the FOM iterate when `with_fom` is set."""
    gmres = gmres_iterate(state, fact)
    if not with_fom:
        return gmres
    fom = fom_iterate(state, fact, tol_factor)
    return IteratePair(
        j=gmres.j,
        x_gmres=gmres.x_gmres,
        y_gmres=gmres.y_gmres,
        gmres_residual_norms=gmres.gmres_residual_norms,
        gmres_relative=gmres.gmres_relative,
        residual_rank=gmres.residual_rank,
        x_fom=fom.x_fom,
        y_fom=fom.y_fom,
        fom_residual_norms=fom.fom_residual_norms,
        fom_relative=fom.fom_relative,
        fom_is_generalized=fom.fom_is_generalized,
    )


def progressive_updates(
    fact: GmresFactorization,
    j: Optional[int] = None,
    tol_factor: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coordinates of the updates X_j - X_{j-1}^G for GMRES and for FOM:

        S^G = [-R_{j-1}^{-1} Z_j N_j^{-1} C_j;  N_j^{-1} C_j]
        S^F = [-R_{j-1}^{-1} Z_j N^+ C^_j;      N^+ C^_j]

    `j` defaults to the latest iteration of `fact`. With deflated columns in
    block j the GMRES part is the difference of the least-squares
    coordinates of iterations j and j-1.

    Raises:
        ContractError: before the first iteration.
        DegenerateBasisError: if N_j is singular without deflated columns.
    """
    j = fact.iteration if j is None else j
    if j == 0:
        raise ContractError("progressive updates need at least one iteration")
    blk = fact.at(j)
    reference = float(np.linalg.norm(blk.n, 2))
    fom_part = pinv_structured_upper(blk.n_hat, tol_factor, reference) @ blk.c_hat
    y1 = solve_upper_deflated(fact.r(j - 1), blk.z) if j > 1 else np.zeros((0, fact.block_size))
    fom_update = np.vstack([-y1 @ fom_part, fom_part])
    if np.any(np.all(blk.n == 0.0, axis=0)):
        y_prev = gmres_coordinates(fact, j - 1)[0] if j > 1 else np.zeros((0, fact.block_size))
        gmres_update = gmres_coordinates(fact, j)[0]
        gmres_update[: y_prev.shape[0]] -= y_prev
        return gmres_update, fom_update
    _check_triangular_nonsingular(blk.n, f"N_{j}")
    gmres_part = _solve_upper(blk.n, blk.c)
    return np.vstack([-y1 @ gmres_part, gmres_part]), fom_update


def explicit_residual_norms(operator: BlockOperator, b, x) -> np.ndarray:
    """Column norms of B - A X."""
    return np.linalg.norm(np.asarray(b) - operator.apply(x), axis=0)


def solve(
    operator: BlockOperator,
    b,
    x0=None,
    max_iterations: Optional[int] = None,
    tolerance: Optional[float] = None,
    rng_seed: Optional[int] = None,
    with_fom: bool = True,
) -> Iterator[IterationSnapshot]:
    """
    Runs block Arnoldi with block GMRES (and FOM) and yields one snapshot per
    iteration.

    The generator stops after the first iteration whose largest relative
    GMRES residual is at most `tolerance`, after `max_iterations`, or when
    the Krylov space is closed. An exhausted space is deflated and the
    iteration continues on its remaining directions.

    Example:
        >>> for snap in solve(shift_matrix(30), b, max_iterations=30):
        ...     print(snap.j, snap.pair.gmres_relative)
    """
    max_iterations = int(config.solver_default("max_iterations") if max_iterations is None else max_iterations)
    tolerance = float(config.solver_default("tolerance") if tolerance is None else tolerance)
    if max_iterations < 1:
        raise ContractError(f"max_iterations must be >= 1, got {max_iterations}")
    if tolerance <= 0:
        raise ContractError(f"tolerance must be positive, got {tolerance}")

    state = initialize(operator, b, x0, rng_seed=rng_seed)
    fact = start_factorization(state)
    for _ in range(max_iterations):
        try:
            state, _ = step(state)
        except OperatorRangeExhaustedError as exc:
            logger.warning("iteration %d: %s", state.iteration + 1, exc)
            return
        fact = advance_factorization(fact, state.column_block(state.iteration))
        pair = iterate_pair(state, fact, with_fom=with_fom)
        yield IterationSnapshot(j=state.iteration, state=state, fact=fact, pair=pair)

        if pair.gmres_relative.max() <= tolerance:
            logger.info("converged at iteration %d", state.iteration)
            return
        if state.closed:
            logger.warning(
                "Krylov space closed at iteration %d before reaching tolerance",
                state.iteration,
            )
            return
