"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so every failure that a user can
trigger should surface as one of them.
"""


class PmuIdError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ParameterError(PmuIdError, ValueError):
    """A numeric or structural argument is out of its allowed range."""

    exit_code = 2


class BoundsError(ParameterError, IndexError):
    """An index or rank lies outside the admissible range."""


class ValidationError(ParameterError):
    """Input data or a document failed validation."""


class ParseError(ValidationError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegeneracyError(PmuIdError, ArithmeticError):
    """A selected submatrix or factor is (numerically) singular."""

    exit_code = 3


class TrainingFailure(PmuIdError):
    """Adaptive training could not reach the requested tolerance.

    ``trace`` holds ``(K, eta, bound)`` tuples for every rank tried.
    """

    exit_code = 4

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)

    @property
    def best(self):
        if not self.trace:
            return None
        return min(self.trace, key=lambda row: row[2])
