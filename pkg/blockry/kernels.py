"""
Dense linear-algebra primitives: Householder QR, SVD, numerical rank,
structured pseudo-inverses, the CS-decomposition of 2L x 2L orthogonal
blocks and principal angles between subspaces.

All routines work on real float64 arrays and return new arrays; inputs are
never modified.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from . import config
from .exceptions import ContractError

EPS = np.finfo(np.float64).eps


def frozen(a) -> np.ndarray:
    """Read-only float64 copy of `a`."""
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """
    Converts `a` into a two-dimensional float64 array with finite entries.

    Raises:
        ContractError: if `a` is not two-dimensional or holds NaN/Inf.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class CsDecomposition:
    """
    CS-decomposition of an orthogonal 2L x 2L matrix H = [[Q11, Q12], [Q21, Q22]]:

        Q11 = U1 C V1^T,  Q12 = U1 S V2^T,
        Q21 = U2 S V1^T,  Q22 = -U2 C V2^T,

    with cosines sorted ascending and sines descending.
    """

    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    cosines: np.ndarray
    sines: np.ndarray
    angles: np.ndarray

    @property
    def block_size(self) -> int:
        return len(self.cosines)

    def blocks(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Reconstructs (Q11, Q12, Q21, Q22) from the factors."""
        c = np.diag(self.cosines)
        s = np.diag(self.sines)
        return (
            self.u1 @ c @ self.v1.T,
            self.u1 @ s @ self.v2.T,
            self.u2 @ s @ self.v1.T,
            -self.u2 @ c @ self.v2.T,
        )


def householder_qr(a) -> Tuple[np.ndarray, np.ndarray]:
    """
    Full QR factorization by Householder reflections (LAPACK geqrf/orgqr).
    No sign normalization is applied to the diagonal of R.

    Args:
        a: m x n matrix with m >= n >= 1.

    Returns:
        (q, r): m x m orthogonal q and m x n upper triangular r with a = q r.
        Entries of r below the diagonal are exactly zero.

    Raises:
        ContractError: on m < n or an empty input.
    """
    a = as_matrix(a)
    m, n = a.shape
    if n < 1 or m < n:
        raise ContractError(f"householder_qr needs m >= n >= 1, got {m}x{n}")
    q, r = scipy.linalg.qr(a, mode="full")
    return q, np.triu(r)


def svd(a) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Thin SVD a = u diag(s) v^T.

    Returns:
        (u, s, v) with u m x k, v n x k (k = min(m, n)) and s nonincreasing.
    """
    a = as_matrix(a)
    u, s, vh = scipy.linalg.svd(a, full_matrices=False)
    return u, s, vh.T


def _rank_threshold(
    shape: Tuple[int, int],
    sigma_max: float,
    tol_factor: Optional[float],
    reference: Optional[float],
) -> float:
    tol_factor = config.numerics("rank_tol_factor", tol_factor)
    if tol_factor <= 0:
        raise ContractError(f"tol_factor must be positive, got {tol_factor}")
    scale = max(sigma_max, reference or 0.0)
    return tol_factor * max(shape) * EPS * scale


def numerical_rank(
    a, tol_factor: Optional[float] = None, reference: Optional[float] = None
) -> int:
    """
    Number of singular values above tol_factor * max(m, n) * eps * sigma_1.

    Args:
        a: The matrix.
        tol_factor: Multiplier of the threshold, `numerics.rank_tol_factor` by default.
        reference: Optional norm that replaces sigma_1 when it is larger. Blocks
            that are pure rounding noise relative to a surrounding factorization
            are thereby counted as zero.

    Examples:
        >>> numerical_rank(np.zeros((4, 4)))
        0
        >>> numerical_rank([[0.0, 0.0], [-1.0, 0.0]])
        1
    """
    a = as_matrix(a)
    if a.size == 0:
        return 0
    s = scipy.linalg.svdvals(a)
    if s[0] == 0.0 and not reference:
        return 0
    threshold = _rank_threshold(a.shape, s[0], tol_factor, reference)
    return int(np.count_nonzero(s > threshold))


def orthonormal_basis(
    a, tol_factor: Optional[float] = None, reference: Optional[float] = None
) -> np.ndarray:
    """Orthonormal basis of the numerical range of `a` (leading left singular vectors)."""
    a = as_matrix(a)
    if a.size == 0:
        return np.zeros((a.shape[0], 0))
    u, _, _ = svd(a)
    return u[:, : numerical_rank(a, tol_factor, reference)]


def rank_revealing_factor(
    h, tol_factor: Optional[float] = None, reference: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Rank-r factorization h = m_hat @ y2 of a square block.

    m_hat (L x r) has orthonormal columns, y2 (r x L) is upper trapezoidal and
    equals m_hat^T h. `complement` (L x (L-r)) completes m_hat to an orthogonal
    matrix; for r = 0 it is the identity.
    """
    h = as_matrix(h)
    size = h.shape[1]
    r = numerical_rank(h, tol_factor, reference)
    if r == 0:
        return np.zeros((size, 0)), np.zeros((0, size)), np.eye(size)
    u, _, _ = svd(h)
    leading = u[:, :r]
    q, y = scipy.linalg.qr(leading.T @ h, mode="economic")
    m_hat = leading @ q
    if r < size:
        q_full, _ = householder_qr(m_hat)
        complement = q_full[:, r:]
    else:
        complement = np.zeros((size, 0))
    return m_hat, np.triu(y), complement


def pinv_structured_upper(
    n_hat, tol_factor: Optional[float] = None, reference: Optional[float] = None
) -> np.ndarray:
    """
    Moore-Penrose pseudo-inverse of an upper triangular block whose trailing
    rows vanish, N = [Y; 0] with Y of size r x L.

    The result has the shape [Y^+ 0], i.e. its last L - r columns are zero.
    For a nonsingular N it is computed by back substitution.

    Raises:
        ContractError: if `n_hat` is not square or not upper triangular.

    Examples:
        >>> pinv_structured_upper([[0.0, 1.0], [0.0, 0.0]])
        array([[0., 0.],
               [1., 0.]])
    """
    n_hat = as_matrix(n_hat, "n_hat")
    size, cols = n_hat.shape
    if size != cols:
        raise ContractError(f"n_hat must be square, got {size}x{cols}")
    scale = max(float(np.linalg.norm(n_hat, 2)) if n_hat.size else 0.0, reference or 0.0)
    below = np.abs(np.tril(n_hat, -1))
    if below.size and below.max() > 1e-12 * max(1.0, scale):
        raise ContractError(
            f"n_hat is not upper triangular (largest subdiagonal entry {below.max():.3e})"
        )

    result = np.zeros((size, size))
    threshold = _rank_threshold(n_hat.shape, scale, tol_factor, None)
    significant = np.flatnonzero(np.linalg.norm(n_hat, axis=1) > threshold)
    if significant.size == 0:
        return result
    r = int(significant[-1]) + 1

    if r == size and numerical_rank(n_hat, tol_factor, reference) == size:
        return scipy.linalg.solve_triangular(np.triu(n_hat), np.eye(size), lower=False)

    result[:, :r] = scipy.linalg.pinv(np.triu(n_hat)[:r], atol=threshold, rtol=0.0)
    return result


def _check_orthonormal(basis: np.ndarray, name: str, tol: float):
    defect = np.linalg.norm(basis.T @ basis - np.eye(basis.shape[1]))
    if defect > tol:
        raise ContractError(
            f"{name} is not orthonormal (||B^T B - I||_F = {defect:.3e})"
        )


def cs_decompose(h_block, tol: Optional[float] = None) -> CsDecomposition:
    """
    CS-decomposition of an orthogonal 2L x 2L matrix in the convention
    Q22 = -U2 C V2^T, with cosines ascending.

    Args:
        h_block: The orthogonal matrix.
        tol: Allowed ||H^T H - I||_F, `numerics.orthogonality_tol` by default.

    Raises:
        ContractError: for odd or non-square shapes and non-orthogonal input.

    Examples:
        >>> cs = cs_decompose([[0.6, 0.8], [0.8, -0.6]])
        >>> cs.cosines, cs.sines
        (array([0.6]), array([0.8]))
    """
    h = as_matrix(h_block, "h_block")
    m, n = h.shape
    if m != n or m % 2:
        raise ContractError(f"h_block must be 2L x 2L, got {m}x{n}")
    tol = config.numerics("orthogonality_tol", tol)
    defect = np.linalg.norm(h.T @ h - np.eye(m))
    if defect > tol:
        raise ContractError(f"h_block is not orthogonal (||H^T H - I||_F = {defect:.3e})")

    size = m // 2
    q11, q12 = h[:size, :size], h[:size, size:]
    q21, q22 = h[size:, :size], h[size:, size:]

    (u1, u2), theta, (v1h, v2h) = scipy.linalg.cossin(h, p=size, q=size, separate=True)
    cosines = np.cos(theta)
    sines = np.sin(theta)
    v1 = v1h.T
    c, s = np.diag(cosines), np.diag(sines)

    # the sign convention of the off-diagonal blocks differs between LAPACK
    # drivers; pick the column signs of U2 and V2 that reproduce H
    best = None
    for a in (1.0, -1.0):
        for b in (1.0, -1.0):
            cand_u2, cand_v2 = a * u2, b * v2h.T
            err = (
                np.linalg.norm(q12 - u1 @ s @ cand_v2.T)
                + np.linalg.norm(q21 - cand_u2 @ s @ v1.T)
                + np.linalg.norm(q22 + cand_u2 @ c @ cand_v2.T)
            )
            if best is None or err < best[0]:
                best = (err, cand_u2, cand_v2)
    _, u2, v2 = best
    if np.linalg.norm(q11 - u1 @ c @ v1.T) > 1e-8:
        raise ContractError("CS-decomposition failed to reproduce the (1,1) block")

    order = np.argsort(cosines, kind="stable")
    cosines = np.clip(cosines[order], 0.0, 1.0)
    sines = np.clip(sines[order], 0.0, 1.0)
    return CsDecomposition(
        u1=frozen(u1[:, order]),
        u2=frozen(u2[:, order]),
        v1=frozen(v1[:, order]),
        v2=frozen(v2[:, order]),
        cosines=frozen(cosines),
        sines=frozen(sines),
        angles=frozen(np.arctan2(sines, cosines)),
    )


def principal_angles(basis_u, basis_v, tol: Optional[float] = None) -> np.ndarray:
    """
    Principal angles (radians, ascending) between the ranges of two
    orthonormal bases. Their cosines are the singular values of U^T V.

    Raises:
        ContractError: if a basis is not orthonormal to `tol`
            (`numerics.orthogonality_tol` by default) or row counts differ.
    """
    u = as_matrix(basis_u, "basis_u")
    v = as_matrix(basis_v, "basis_v")
    if u.shape[0] != v.shape[0]:
        raise ContractError(f"bases live in different spaces: {u.shape[0]} vs {v.shape[0]}")
    tol = config.numerics("orthogonality_tol", tol)
    _check_orthonormal(u, "basis_u", tol)
    _check_orthonormal(v, "basis_v", tol)
    if u.shape[1] == 0 or v.shape[1] == 0:
        return np.zeros(0)
    cosines = np.clip(scipy.linalg.svdvals(u.T @ v), 0.0, 1.0)
    return np.sort(np.arccos(cosines))


def sign_equivalent(a, b, tol: float = 1e-8) -> bool:
    """
    True if D1 a D2 = b for some diagonal sign matrices D1, D2, up to
    `tol` times max(1, max|b|). QR factors from different sign conventions
    compare equal under this rule.

    Examples:
        >>> sign_equivalent(np.diag([1.0, -1.0]), np.eye(2))
        True
        >>> sign_equivalent([[1.0, 1.0], [1.0, 1.0]], [[1.0, 1.0], [1.0, -1.0]])
        False
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        return False
    atol = tol * max(1.0, float(np.abs(b).max()) if b.size else 1.0)
    if not np.allclose(np.abs(a), np.abs(b), rtol=0.0, atol=atol):
        return False

    m, n = b.shape
    significant = np.abs(b) > atol
    flips = np.sign(a) * np.sign(b)
    rows = np.zeros(m)
    cols = np.zeros(n)
    for start in range(m):
        if rows[start] or not significant[start].any():
            continue
        rows[start] = 1.0
        pending = [("row", start)]
        while pending:
            kind, idx = pending.pop()
            if kind == "row":
                for j in np.flatnonzero(significant[idx]):
                    need = flips[idx, j] * rows[idx]
                    if cols[j] == 0:
                        cols[j] = need
                        pending.append(("col", j))
                    elif cols[j] != need:
                        return False
            else:
                for i in np.flatnonzero(significant[:, idx]):
                    need = flips[i, idx] * cols[idx]
                    if rows[i] == 0:
                        rows[i] = need
                        pending.append(("row", i))
                    elif rows[i] != need:
                        return False
    rows[rows == 0] = 1.0
    cols[cols == 0] = 1.0
    return bool(np.allclose(rows[:, None] * a * cols[None, :], b, rtol=0.0, atol=atol))


def canonical_sign_form(a, tol: float = 1e-12) -> np.ndarray:
    """
    Representative of the sign-equivalence class of `a`: rows, then columns,
    are flipped so that their first significant entry is positive.
    """
    out = np.array(a, dtype=np.float64, copy=True)
    if out.size == 0:
        return out
    atol = tol * max(1.0, float(np.abs(out).max()))
    for i in range(out.shape[0]):
        nz = np.flatnonzero(np.abs(out[i]) > atol)
        if nz.size and out[i, nz[0]] < 0:
            out[i] = -out[i]
    for j in range(out.shape[1]):
        nz = np.flatnonzero(np.abs(out[:, j]) > atol)
        if nz.size and out[nz[0], j] < 0:
            out[:, j] = -out[:, j]
    out[np.abs(out) <= atol] = 0.0
    return out
