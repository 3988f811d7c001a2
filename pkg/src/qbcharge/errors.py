"""Exception types shared across the toolkit."""


class QBError(Exception):
    """Base class for all toolkit errors."""


class DimMismatch(QBError):
    """Operator/state dimensions are incompatible."""


class NotHermitian(QBError):
    """A matrix required to be hermitian fails the symmetry check."""


class CutoffTooSmall(QBError):
    """Fock-space truncation is too small for the requested dynamics."""


class TooManyBatteries(QBError):
    """Star configuration exceeds the supported battery count."""


class RequiresResonance(QBError):
    """A closed-form expression is only valid for zero detunings."""


class OnResonancePole(QBError):
    """Detuned closed form evaluated at a pole of the expression."""


class SingularMatrix(QBError):
    """Coefficient matrix is singular; the explicit-inverse path is unavailable."""


class StepSizeUnderflow(QBError):
    """Adaptive integration failed; carries the last successfully reached time."""

    def __init__(self, message: str, last_good_time: float):
        super().__init__(message)
        self.last_good_time = last_good_time


class DegenerateSteadyState(QBError):
    """Liouvillian null space has dimension > 1; steady state depends on the initial state."""

    def __init__(self, message: str, null_dim: int):
        super().__init__(message)
        self.null_dim = null_dim


class NotConverged(QBError):
    """Charging threshold still exceeded at the end of the time horizon."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class Unstable(QBError):
    """A stochastic trajectory norm drifted beyond the stability bound."""


class ParseError(QBError):
    """Config file could not be parsed; carries line/column."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column


class ValidationError(QBError):
    """Config value failed validation; carries the offending field name."""

    def __init__(self, message: str, field: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class RegimeMismatch(UserWarning):
    """Asymptotic charging-time formula applied outside its regime of validity."""
