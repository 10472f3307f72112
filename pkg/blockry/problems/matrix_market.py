"""
Reader and writer for the Matrix Market exchange format.

Supported headers are `%%MatrixMarket matrix coordinate|array real|integer
general|symmetric`. Coordinate data becomes a CSR matrix with duplicate
entries summed; array data becomes a dense array (column-major in the file).
"""

import io
import os
from dataclasses import dataclass
from typing import IO, Iterator, List, Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse

from .._logging import get_logger
from ..arnoldi import BlockOperator, DenseOperator, SparseOperator
from ..exceptions import ContractError, MatrixMarketParseError, UnsupportedFormatError

logger = get_logger("problems.matrix_market")

SUPPORTED_FORMATS = ("coordinate", "array")
SUPPORTED_FIELDS = ("real", "integer")
SUPPORTED_SYMMETRIES = ("general", "symmetric")


@dataclass(frozen=True)
class MatrixMarketMatrix:
    """
    Content of a Matrix Market file.

    `data` is a scipy CSR matrix for the coordinate format and a dense
    ndarray for the array format.
    """

    format: str
    field: str
    symmetry: str
    shape: Tuple[int, int]
    data: Union[scipy.sparse.csr_matrix, np.ndarray]

    @property
    def is_sparse(self) -> bool:
        return self.format == "coordinate"

    def toarray(self) -> np.ndarray:
        if self.is_sparse:
            return self.data.toarray()
        return np.array(self.data)

    def to_operator(self) -> BlockOperator:
        """
        Raises:
            ContractError: for a non-square matrix.
        """
        if self.shape[0] != self.shape[1]:
            raise ContractError(f"an operator needs a square matrix, got {self.shape}")
        if self.is_sparse:
            return SparseOperator(self.data)
        return DenseOperator(self.data)


def _content_lines(stream: IO[str]) -> Iterator[Tuple[int, List[str]]]:
    for lineno, line in enumerate(stream, start=2):
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        yield lineno, stripped.split()


def _parse_header(line: str) -> Tuple[str, str, str]:
    tokens = line.strip().split()
    if len(tokens) != 5 or tokens[0].lower() != "%%matrixmarket":
        raise MatrixMarketParseError(1, f"not a Matrix Market header: {line.strip()!r}")
    obj, fmt, field, symmetry = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise UnsupportedFormatError(f"unsupported object {obj!r}")
    if fmt not in SUPPORTED_FORMATS:
        raise UnsupportedFormatError(f"unsupported format {fmt!r}")
    if field not in SUPPORTED_FIELDS:
        raise UnsupportedFormatError(f"unsupported field {field!r}")
    if symmetry not in SUPPORTED_SYMMETRIES:
        raise UnsupportedFormatError(f"unsupported symmetry {symmetry!r}")
    return fmt, field, symmetry


def _parse_value(token: str, field: str, lineno: int) -> float:
    try:
        if field == "integer":
            return float(int(token))
        value = float(token)
    except ValueError as exc:
        raise MatrixMarketParseError(lineno, f"invalid {field} value {token!r}") from exc
    if not np.isfinite(value):
        raise MatrixMarketParseError(lineno, f"non-finite value {token!r}")
    return value


def _parse_ints(tokens: List[str], count: int, lineno: int, what: str) -> List[int]:
    if len(tokens) != count:
        raise MatrixMarketParseError(lineno, f"expected {count} integers for {what}, got {len(tokens)}")
    try:
        values = [int(t) for t in tokens]
    except ValueError as exc:
        raise MatrixMarketParseError(lineno, f"invalid {what}: {' '.join(tokens)!r}") from exc
    if any(v < 0 for v in values):
        raise MatrixMarketParseError(lineno, f"negative {what}")
    return values


def _read_coordinate(lines, field, symmetry, lineno, size_tokens):
    rows, cols, nnz = _parse_ints(size_tokens, 3, lineno, "size line")
    if symmetry == "symmetric" and rows != cols:
        raise MatrixMarketParseError(lineno, "symmetric matrix must be square")
    i_idx, j_idx, values = [], [], []
    count = 0
    for lineno, tokens in lines:
        if count == nnz:
            raise MatrixMarketParseError(lineno, f"more than {nnz} entries")
        if len(tokens) != 3:
            raise MatrixMarketParseError(lineno, f"expected 'row col value', got {len(tokens)} fields")
        i, j = _parse_ints(tokens[:2], 2, lineno, "indices")
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise MatrixMarketParseError(lineno, f"index ({i}, {j}) outside {rows}x{cols}")
        value = _parse_value(tokens[2], field, lineno)
        if symmetry == "symmetric" and i < j:
            raise MatrixMarketParseError(lineno, "symmetric storage expects the lower triangle")
        i_idx.append(i - 1)
        j_idx.append(j - 1)
        values.append(value)
        if symmetry == "symmetric" and i != j:
            i_idx.append(j - 1)
            j_idx.append(i - 1)
            values.append(value)
        count += 1
    if count != nnz:
        raise MatrixMarketParseError(lineno, f"expected {nnz} entries, found {count}")
    coo = scipy.sparse.coo_matrix((values, (i_idx, j_idx)), shape=(rows, cols), dtype=np.float64)
    # duplicates are summed by the conversion
    return (rows, cols), coo.tocsr()


def _read_array(lines, field, symmetry, lineno, size_tokens):
    rows, cols = _parse_ints(size_tokens, 2, lineno, "size line")
    if symmetry == "symmetric":
        if rows != cols:
            raise MatrixMarketParseError(lineno, "symmetric matrix must be square")
        positions = [(i, j) for j in range(cols) for i in range(j, rows)]
    else:
        positions = [(i, j) for j in range(cols) for i in range(rows)]
    dense = np.zeros((rows, cols))
    count = 0
    for lineno, tokens in lines:
        for token in tokens:
            if count == len(positions):
                raise MatrixMarketParseError(lineno, f"more than {len(positions)} values")
            i, j = positions[count]
            dense[i, j] = _parse_value(token, field, lineno)
            if symmetry == "symmetric":
                dense[j, i] = dense[i, j]
            count += 1
    if count != len(positions):
        raise MatrixMarketParseError(lineno, f"expected {len(positions)} values, found {count}")
    return (rows, cols), dense


def parse_matrix_market(stream: Union[IO[str], str]) -> MatrixMarketMatrix:
    """
    Parses Matrix Market text from a stream (or a string holding the text).

    Raises:
        UnsupportedFormatError: for complex, pattern, skew-symmetric or
            hermitian files.
        MatrixMarketParseError: for malformed lines; carries the line number.

    Example:
        >>> text = "%%MatrixMarket matrix coordinate real general\\n2 2 2\\n1 1 1.0\\n2 2 1.0\\n"
        >>> parse_matrix_market(text).toarray()
        array([[1., 0.],
               [0., 1.]])
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = stream.readline()
    if not header:
        raise MatrixMarketParseError(1, "empty input")
    fmt, field, symmetry = _parse_header(header)
    lines = _content_lines(stream)
    try:
        lineno, size_tokens = next(lines)
    except StopIteration:
        raise MatrixMarketParseError(2, "missing size line") from None

    reader = _read_coordinate if fmt == "coordinate" else _read_array
    shape, data = reader(lines, field, symmetry, lineno, size_tokens)
    logger.debug("parsed %s %s %s matrix of shape %s", fmt, field, symmetry, shape)
    return MatrixMarketMatrix(format=fmt, field=field, symmetry=symmetry, shape=shape, data=data)


def read_matrix_market(path: Union[str, os.PathLike]) -> MatrixMarketMatrix:
    with open(path, "r") as f:
        return parse_matrix_market(f)


def write_matrix_market(matrix, stream: IO) -> None:
    """
    Writes an operator, sparse matrix or dense array in Matrix Market format
    (scipy.io.mmwrite). Sparse input is written in coordinate format.
    """
    if isinstance(matrix, MatrixMarketMatrix):
        matrix = matrix.data
    elif isinstance(matrix, SparseOperator):
        matrix = matrix.matrix
    elif isinstance(matrix, BlockOperator):
        matrix = matrix.to_dense()
    if isinstance(stream, io.TextIOBase):
        buffer = io.BytesIO()
        scipy.io.mmwrite(buffer, matrix)
        stream.write(buffer.getvalue().decode("ascii"))
    else:
        scipy.io.mmwrite(stream, matrix)
