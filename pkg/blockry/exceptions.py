class BlockryError(Exception):
    """
    Base class for all errors raised by blockry.
    """


class ContractError(BlockryError, ValueError):
    """
    Exception raised when an input violates the pre-conditions of an operation.
    """


class RankDeficientResidualError(ContractError):
    """
    Exception raised when the initial block residual does not have full column rank.
    """

    def __init__(self, rank: int, block_size: int):
        self.rank = rank
        self.block_size = block_size
        super().__init__(
            f"initial block residual rank-deficient (rank {rank} < {block_size})"
        )


class OperatorRangeExhaustedError(BlockryError):
    """
    Exception raised when no replacement vectors orthogonal to the basis can be found.
    """

    def __init__(self, message: str = "operator range exhausted"):
        super().__init__(message)


class DegenerateBasisError(BlockryError):
    """
    Exception raised when the R-factor of the block Hessenberg matrix is singular.
    """

    def __init__(self, message: str = "Arnoldi basis degenerate"):
        super().__init__(message)


class SingularRelationError(BlockryError):
    """
    Exception raised when an identity needs a nonsingular square Hessenberg block.
    """

    def __init__(self, rank: int, block_size: int):
        self.rank = rank
        self.block_size = block_size
        super().__init__(
            f"relation requires nonsingular H (numerical rank {rank} < {block_size})"
        )


class MatrixMarketError(BlockryError, ValueError):
    """
    Base class for Matrix Market reading errors.
    """


class UnsupportedFormatError(MatrixMarketError):
    """
    Exception raised for Matrix Market headers outside real/integer general/symmetric.
    """


class MatrixMarketParseError(MatrixMarketError):
    """
    Exception raised for a malformed Matrix Market line.
    """

    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class ProblemFileNotFoundError(BlockryError, FileNotFoundError):
    """
    Exception raised when a matrix file needed by an experiment is missing.
    """

    def __init__(self, path: str, hint: str = ""):
        self.path = path
        self.hint = hint
        message = f"matrix file not found: {path}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)
