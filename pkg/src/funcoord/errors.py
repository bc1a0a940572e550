"""Exception hierarchy shared by all modules."""


class FuncoordError(Exception):
    """Base class for every error raised by this package."""


class GridError(FuncoordError, ValueError):
    pass


class SideError(FuncoordError, ValueError):
    """A primal vector was fed where a dual one is expected, or vice versa."""


class KernelError(FuncoordError, ValueError):
    pass


class IndefiniteMetricError(FuncoordError, ValueError):
    """Raised when an assembled metric fails the positive-definiteness scan.

    Attributes
    ----------
    min_eigenvalue
        Most negative (or smallest) eigenvalue of the Hermitian Gram matrix.
    """

    def __init__(self, message, min_eigenvalue):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SingularTransformError(FuncoordError, ValueError):
    """Raised when an operator is numerically singular.

    Attributes
    ----------
    condition
        2-norm condition number of the offending matrix.
    """

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


class NonHermitianError(FuncoordError, ValueError):
    pass


class IntegrationError(FuncoordError, RuntimeError):
    pass


class ExpressionError(FuncoordError, ValueError):
    """Syntax or evaluation error in the expression grammar.

    ``column`` is 1-based and points at the offending character.
    """

    def __init__(self, message, column):
        super().__init__(f"{message} (column {column})")
        self.column = column


class ConfigError(FuncoordError, ValueError):
    """Configuration diagnostic carrying a 1-based line (and optional column)."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column
