import numpy as np
import scipy.sparse

from ..arnoldi import BlockDiagonalOperator, BlockOperator, SparseOperator
from ..exceptions import ContractError


def shift_matrix(n: int) -> SparseOperator:
    """
    The cyclic shift A e_i = e_{i+1}, A e_n = e_1, stored sparse.

    Examples:
        >>> shift_matrix(2).to_dense()
        array([[0., 1.],
               [1., 0.]])
    """
    n = int(n)
    if n < 2:
        raise ContractError(f"shift matrix needs n >= 2, got {n}")
    cols = np.arange(n)
    rows = (cols + 1) % n
    return SparseOperator(
        scipy.sparse.csr_matrix((np.ones(n), (rows, cols)), shape=(n, n))
    )


def block_diagonal(op_a: BlockOperator, op_b: BlockOperator) -> BlockDiagonalOperator:
    return BlockDiagonalOperator(op_a, op_b)


def unit_vectors(n: int, *indices: int) -> np.ndarray:
    """n x k block [e_i1 ... e_ik] with 1-based indices."""
    block = np.zeros((n, len(indices)))
    for col, i in enumerate(indices):
        if not 1 <= i <= n:
            raise ContractError(f"unit vector e_{i} outside 1..{n}")
        block[i - 1, col] = 1.0
    return block


def seeded_vector(n: int, seed: int, norm: float = 1.0) -> np.ndarray:
    """Standard normal vector from `np.random.default_rng(seed)` scaled to the given 2-norm."""
    v = np.random.default_rng(seed).standard_normal(n)
    return v * (norm / np.linalg.norm(v))
