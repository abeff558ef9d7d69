"""Exception hierarchy shared by every module of the package."""


class GvarError(Exception):
    """Base class for all package errors."""


class ConfigError(GvarError, ValueError):
    """Invalid configuration values."""


class UsageError(GvarError, RuntimeError):
    """An API was called in a state that does not permit it."""


class DimensionError(GvarError, ValueError):
    """Array shapes do not match what an operation expects."""


class InsufficientDataError(GvarError, ValueError):
    """The series is too short for the requested model order."""


class ParseError(GvarError, ValueError):
    """A data file could not be parsed.

    ``row`` and ``column`` are 1-based positions in the file (the header is row 1)
    when the failure can be located, otherwise ``None``.
    """

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DivergedTrainingError(GvarError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, message=None):
        super().__init__(message or f"non-finite loss encountered at epoch {epoch}")
        self.epoch = epoch


class NoStableStructureError(GvarError):
    """Every candidate threshold produced a trivial graph (agreement 0 everywhere)."""

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve


class SingularityError(GvarError, ArithmeticError):
    """A least-squares design matrix is rank deficient."""


class UndefinedTestError(GvarError, ArithmeticError):
    """A Granger F-test cannot be evaluated (degenerate residual variance)."""


class UndefinedMetricError(GvarError, ValueError):
    """A metric is undefined for the given inputs (e.g. a single-class truth)."""
