"""
Block Arnoldi process with breakdown detection and random replacement.

The state is an immutable value: `step` returns a new state, so snapshots
taken during a solve stay valid for later analysis.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse

from . import config
from ._logging import get_logger
from .exceptions import (
    ContractError,
    OperatorRangeExhaustedError,
    RankDeficientResidualError,
)
from .kernels import as_matrix, frozen, householder_qr, numerical_rank

logger = get_logger("arnoldi")


class BlockOperator(ABC):
    """
    A linear map of R^n applied to blocks of column vectors.
    """

    @property
    @abstractmethod
    def dimension(self) -> int:
        """Size n of the space the operator acts on."""

    @abstractmethod
    def _apply(self, block: np.ndarray) -> np.ndarray: ...

    def apply(self, block) -> np.ndarray:
        """
        Returns A @ block for an n x k block (or a length-n vector).

        Raises:
            ContractError: if the row count does not match the dimension.
        """
        arr = np.asarray(block, dtype=np.float64)
        vector = arr.ndim == 1
        if vector:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] != self.dimension:
            raise ContractError(
                f"operator of dimension {self.dimension} applied to block of shape {arr.shape}"
            )
        out = np.asarray(self._apply(arr), dtype=np.float64)
        return out[:, 0] if vector else out

    def to_dense(self) -> np.ndarray:
        return self.apply(np.eye(self.dimension))

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(n={self.dimension})"


class DenseOperator(BlockOperator):
    def __init__(self, matrix):
        matrix = as_matrix(matrix, "operator matrix")
        if matrix.shape[0] != matrix.shape[1]:
            raise ContractError(f"operator matrix must be square, got {matrix.shape}")
        self.matrix = frozen(matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def _apply(self, block):
        return self.matrix @ block

    def to_dense(self) -> np.ndarray:
        return np.array(self.matrix)


class SparseOperator(BlockOperator):
    def __init__(self, matrix):
        matrix = scipy.sparse.csr_matrix(matrix, dtype=np.float64)
        if matrix.shape[0] != matrix.shape[1]:
            raise ContractError(f"operator matrix must be square, got {matrix.shape}")
        if not np.all(np.isfinite(matrix.data)):
            raise ContractError("operator matrix has non-finite entries")
        self.matrix = matrix

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def _apply(self, block):
        return self.matrix @ block

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


class BlockDiagonalOperator(BlockOperator):
    """diag(first, second): `first` acts on the leading rows, `second` on the rest."""

    def __init__(self, first: BlockOperator, second: BlockOperator):
        self.first = first
        self.second = second

    @property
    def dimension(self) -> int:
        return self.first.dimension + self.second.dimension

    def _apply(self, block):
        split = self.first.dimension
        return np.vstack(
            [self.first.apply(block[:split]), self.second.apply(block[split:])]
        )


@dataclass(frozen=True)
class BreakdownEvent:
    """
    A step whose new block had `p` dependent columns.

    `replaced_columns` are the 0-based indices of the dependent columns of
    U_{j+1}; `exhausted` marks a step where no room for replacements was left.
    """

    iteration: int
    p: int
    replaced_columns: Tuple[int, ...]
    exhausted: bool = False


@dataclass(frozen=True)
class BlockArnoldiState:
    """
    Block Arnoldi quantities after `iteration` steps.

    basis is W_{j+1} = [V_1 ... V_{j+1}] (n x (j+1)L), hessenberg is the
    (j+1)L x jL block upper Hessenberg matrix with A W_j = W_{j+1} H.
    `exhausted` is set once dependent columns could not be replaced. Those
    columns stay zero (deflated) and the process continues on the remaining
    ones until a whole block is zero (`closed`).
    """

    operator: BlockOperator
    rhs: np.ndarray
    x0: np.ndarray
    s0: np.ndarray
    basis: np.ndarray
    hessenberg: np.ndarray
    block_size: int
    iteration: int = 0
    breakdown_log: Tuple[BreakdownEvent, ...] = field(default_factory=tuple)
    rng_seed: int = 0x5EED
    exhausted: bool = False

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    def block(self, i: int) -> np.ndarray:
        """V_i, 1-based."""
        if not 1 <= i <= self.iteration + 1:
            raise ContractError(f"block index {i} outside 1..{self.iteration + 1}")
        size = self.block_size
        return self.basis[:, (i - 1) * size : i * size]

    def w(self, j: Optional[int] = None) -> np.ndarray:
        """W_j = [V_1 ... V_j]; defaults to the current iteration."""
        j = self.iteration if j is None else j
        if not 0 <= j <= self.iteration + 1:
            raise ContractError(f"W_{j} is not available at iteration {self.iteration}")
        return self.basis[:, : j * self.block_size]

    def hbar(self, j: Optional[int] = None) -> np.ndarray:
        """The (j+1)L x jL leading part of the block Hessenberg matrix."""
        j = self.iteration if j is None else j
        if not 0 <= j <= self.iteration:
            raise ContractError(f"H_{j} is not available at iteration {self.iteration}")
        size = self.block_size
        return self.hessenberg[: (j + 1) * size, : j * size]

    def column_block(self, j: int) -> np.ndarray:
        """The j-th block column of the Hessenberg matrix, (j+1)L x L."""
        if not 1 <= j <= self.iteration:
            raise ContractError(f"column block {j} outside 1..{self.iteration}")
        size = self.block_size
        return self.hessenberg[: (j + 1) * size, (j - 1) * size : j * size]

    def breakdown_before(self, j: int) -> bool:
        """True if a breakdown happened in a step earlier than j."""
        return any(event.iteration < j for event in self.breakdown_log)

    def live_columns(self, j: Optional[int] = None) -> np.ndarray:
        """Mask of the nonzero (not deflated) columns of W_j."""
        return np.any(self.w(j) != 0.0, axis=0)

    @property
    def closed(self) -> bool:
        """True if the newest block is entirely deflated; no further step is possible."""
        return self.exhausted and not np.any(self.block(self.iteration + 1))

    def breakdown_at(self, j: int) -> int:
        """Number of dependent columns found by step j."""
        return sum(event.p for event in self.breakdown_log if event.iteration == j)


def initialize(
    operator: BlockOperator,
    b,
    x0=None,
    rng_seed: Optional[int] = None,
    tol_factor: Optional[float] = None,
) -> BlockArnoldiState:
    """
    Starts the block Arnoldi process from F0 = B - A X0 = V_1 S0.

    Args:
        operator: The operator A.
        b: n x L right-hand sides.
        x0: n x L initial guess, zero by default.
        rng_seed: Seed of the replacement vectors, `solver.seed` by default.
        tol_factor: Rank tolerance factor for the full-rank check of F0.

    Raises:
        ContractError: on shape mismatches.
        RankDeficientResidualError: if F0 does not have full column rank.
    """
    b = as_matrix(b, "b")
    n, size = b.shape
    if n != operator.dimension:
        raise ContractError(f"b has {n} rows, operator dimension is {operator.dimension}")
    if size < 1 or size > n:
        raise ContractError(f"block size must be in 1..{n}, got {size}")
    x0 = np.zeros_like(b) if x0 is None else as_matrix(x0, "x0")
    if x0.shape != b.shape:
        raise ContractError(f"x0 has shape {x0.shape}, expected {b.shape}")
    seed = int(config.solver_default("seed") if rng_seed is None else rng_seed)

    f0 = b - operator.apply(x0)
    rank = numerical_rank(f0, tol_factor)
    if rank < size:
        raise RankDeficientResidualError(rank, size)
    q, r = householder_qr(f0)
    logger.debug("initialized block Arnoldi: n=%d, L=%d", n, size)
    return BlockArnoldiState(
        operator=operator,
        rhs=frozen(b),
        x0=frozen(x0),
        s0=frozen(r[:size]),
        basis=frozen(q[:, :size]),
        hessenberg=frozen(np.zeros((size, 0))),
        block_size=size,
        rng_seed=seed,
    )


def _replacement_block(
    basis: np.ndarray, p: int, seed: int, iteration: int, retries: int
) -> np.ndarray:
    n = basis.shape[0]
    rng = np.random.default_rng([seed, iteration])
    for attempt in range(retries):
        g = rng.standard_normal((n, p))
        scale = np.linalg.norm(g, axis=0).max()
        for _ in range(2):
            g -= basis @ (basis.T @ g)
        q, r = scipy.linalg.qr(g, mode="economic")
        if np.all(np.abs(np.diag(r)) > 1e-8 * scale):
            q -= basis @ (basis.T @ q)
            q, _ = scipy.linalg.qr(q, mode="economic")
            return q
        logger.debug("replacement attempt %d at step %d rejected", attempt + 1, iteration)
    raise OperatorRangeExhaustedError()


def step(
    state: BlockArnoldiState,
    breakdown_tol: Optional[float] = None,
    retries: Optional[int] = None,
) -> Tuple[BlockArnoldiState, int]:
    """
    One block Arnoldi step: V_{j+1} and the j-th block column of the Hessenberg matrix.

    U_{j+1} = A V_j - sum_i V_i H_ij is formed by block modified Gram-Schmidt
    with one reorthogonalization pass and then factored column by column,
    U_{j+1} = V'' H'' with H'' in row echelon form. A column whose remaining
    norm is at most breakdown_tol * ||A V_j||_F is dependent. The p dependent
    columns are replaced by random vectors orthonormal to the basis and the
    matching rows of H_{j+1,j} are zero.

    If the nonzero basis columns plus p replacements would exceed n, the
    replacements are zero columns and the returned state is marked
    `exhausted`. Zero columns map to zero and are dependent again in the next
    step, so stepping continues on the remaining columns until the state is
    `closed`.

    Returns:
        (new state, p)

    Raises:
        OperatorRangeExhaustedError: if the state is closed or no
            replacement vectors are found after `retries` attempts.
    """
    if state.closed:
        raise OperatorRangeExhaustedError(
            "operator range exhausted: the basis already spans the Krylov space"
        )
    breakdown_tol = config.numerics("breakdown_tol", breakdown_tol)
    retries = int(config.numerics("replacement_retries", retries))
    size, j, n = state.block_size, state.iteration, state.n
    basis = np.asarray(state.basis)

    w = state.operator.apply(state.block(j + 1))
    threshold = breakdown_tol * np.linalg.norm(w)
    column = np.zeros(((j + 2) * size, size))

    for _ in range(2):
        for i in range(j + 1):
            vi = basis[:, i * size : (i + 1) * size]
            coeff = vi.T @ w
            w = w - vi @ coeff
            column[i * size : (i + 1) * size] += coeff

    top = (j + 1) * size
    accepted = []
    h_sub = np.zeros((size, size))
    dependent = []
    for col in range(size):
        u = w[:, col].copy()
        for _ in range(2):
            coeff = basis.T @ u
            u -= basis @ coeff
            column[:top, col] += coeff
            if accepted:
                q = np.column_stack(accepted)
                coeff = q.T @ u
                u -= q @ coeff
                h_sub[: len(accepted), col] += coeff
        norm = np.linalg.norm(u)
        if norm > threshold and norm > 0.0:
            h_sub[len(accepted), col] = norm
            accepted.append(u / norm)
        else:
            dependent.append(col)

    p = len(dependent)
    v_new = np.column_stack(accepted) if accepted else np.zeros((n, 0))
    log = state.breakdown_log
    exhausted = state.exhausted
    if p:
        kept = np.hstack([basis[:, state.live_columns(j + 1)], v_new])
        if kept.shape[1] + p > n:
            exhausted = True
            replacement = np.zeros((n, p))
            if state.exhausted:
                logger.debug("step %d: %d deflated column(s)", j + 1, p)
            else:
                logger.warning(
                    "step %d: %d dependent column(s) and no room left in R^%d, Krylov space exhausted",
                    j + 1,
                    p,
                    n,
                )
        else:
            replacement = _replacement_block(kept, p, state.rng_seed, j + 1, retries)
            logger.info(
                "breakdown at step %d: %d dependent column(s) %s replaced by random vectors",
                j + 1,
                p,
                dependent,
            )
        v_new = np.hstack([v_new, replacement])
        log = log + (BreakdownEvent(j + 1, p, tuple(dependent), exhausted),)

    column[top:] = h_sub
    hessenberg = np.zeros(((j + 2) * size, (j + 1) * size))
    hessenberg[:top, : j * size] = state.hessenberg
    hessenberg[:, j * size :] = column
    logger.debug("step %d done, ||H_{j+1,j}||_F = %.3e", j + 1, np.linalg.norm(h_sub))

    new_state = replace(
        state,
        basis=frozen(np.hstack([basis, v_new])),
        hessenberg=frozen(hessenberg),
        iteration=j + 1,
        breakdown_log=log,
        exhausted=exhausted,
    )
    if new_state.closed:
        logger.info("Krylov space closed at step %d", j + 1)
    return new_state, p


def relation_residual(state: BlockArnoldiState) -> float:
    """||A W_j - W_{j+1} H||_F / max(1, ||H||_F)."""
    hbar = state.hbar()
    lhs = state.operator.apply(state.w())
    return float(
        np.linalg.norm(lhs - state.basis @ hbar) / max(1.0, np.linalg.norm(hbar))
    )


def orthonormality_defect(state: BlockArnoldiState) -> float:
    """||W^T W - I||_F over the nonzero columns of the current basis."""
    basis = state.basis[:, state.live_columns(state.iteration + 1)]
    return float(np.linalg.norm(basis.T @ basis - np.eye(basis.shape[1])))
