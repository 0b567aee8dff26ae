"""Exception hierarchy shared by all modules.

Every error maps onto one CLI exit code (see :mod:`sotpdeg.cli`):
argument/parse problems exit with 2, numeric/runtime problems with 3.
"""


class SotpdegError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class InvalidArgumentError(SotpdegError, ValueError):
    exit_code = 2


class ParseError(InvalidArgumentError):
    """Malformed input file; message carries the row/column position."""

    def __init__(self, message, row=None, col=None):
        if row is not None:
            message = f"{message} (row {row}" + (f", col {col})" if col is not None else ")")
        super().__init__(message)
        self.row = row
        self.col = col


class NumericPreconditionError(SotpdegError, ArithmeticError):
    """Input violates a numeric precondition (asymmetry, non-PSD, isolated nodes...)."""


class ResourceLimitError(SotpdegError):
    """A dense oracle path was asked to materialize a matrix above the dense limit."""


class DegenerateSpectrumError(NumericPreconditionError):
    pass


class DivergenceError(SotpdegError, ArithmeticError):
    pass


class TrainingError(SotpdegError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} at step {step}")
        self.step = step


class StateError(SotpdegError, RuntimeError):
    pass
