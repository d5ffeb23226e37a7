"""
Exception hierarchy shared by the solvers, the imaging pipeline and the CLI.
Each error carries the process exit code the CLI maps it to.
"""


class OrlsError(Exception):
    """Base class for all errors raised by this package."""
    exit_code = 3


class DimensionMismatchError(OrlsError, ValueError):
    """Exception raised when operands disagree in dimension."""
    exit_code = 2


class NonFiniteValueError(OrlsError, ValueError):
    """Exception raised when NaN or infinity reaches a numerical kernel."""
    exit_code = 3


class NotPositiveDefiniteError(OrlsError, ArithmeticError):
    """Exception raised when a factorization finds a non-positive pivot."""
    exit_code = 3


class SingularUpdateError(OrlsError, ArithmeticError):
    """Exception raised when a rank-1 inverse update would be singular."""
    exit_code = 3


class DataFormatError(OrlsError, ValueError):
    """Exception raised for malformed mask, image or manifest files and inconsistent grids."""
    exit_code = 2
