"""Exception types shared across the package."""


class YMHeatError(Exception):
    """Base class for errors raised by ymheat."""


class DomainError(YMHeatError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class QuadratureError(YMHeatError, RuntimeError):
    """Adaptive quadrature exhausted its budget before meeting the tolerance."""


class PreconditionError(YMHeatError, ValueError):
    """An operation was called outside its stated regime of validity."""


class StepFailure(YMHeatError, RuntimeError):
    """Time integration could not make progress."""


class BlowUpDetected(YMHeatError, RuntimeError):
    """The solution left the perturbative class (overflow guard tripped)."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class ConfigError(YMHeatError, ValueError):
    """Malformed configuration file or override."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class GridWarning(UserWarning):
    """A finite-difference stencil is under-resolved on the given grid."""
