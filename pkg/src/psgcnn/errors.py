"""Exception types shared across the package.

The CLI maps these onto exit codes: ``DataError`` -> 2, ``NumericalError`` -> 3.
"""


class PsgcnnError(Exception):
    """Base class for all package errors."""


class DataError(PsgcnnError, ValueError):
    """Malformed or inconsistent input data."""


class InsufficientDataError(DataError):
    """A stream has too few samples for the requested operation."""


class ShapeError(PsgcnnError, ValueError):
    """Array shapes or dimensions do not chain."""


class DomainError(PsgcnnError, ValueError):
    """An argument lies outside its valid domain (negative radius, bad latitude, ...)."""


class NumericalError(PsgcnnError, ArithmeticError):
    """A numerical procedure produced non-finite values."""


class DivergenceError(NumericalError):
    """Simulation state left the admissible range.

    Attributes:
        step: index of the Euler-Maruyama step that diverged.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class TrainingError(NumericalError):
    """Training loss became non-finite.

    Attributes:
        epoch: index of the epoch where the loss went non-finite.
    """

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
