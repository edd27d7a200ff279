"""Exception types shared across the package."""


class DivisorError(Exception):
    """Base class for computation errors (CLI exit code 2)."""


class ValidationError(DivisorError, ValueError):
    """A distribution or parameter violates its invariants."""


class ParseError(DivisorError, ValueError):
    def __init__(self, line, column, message):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"line {line}, column {column}: {message}")


class NotAdmissible(DivisorError):
    """The characteristic function has a (numerical) zero on the grid."""

    def __init__(self, message, y_loc=None):
        self.y_loc = y_loc
        super().__init__(message)


class RefinementExhausted(DivisorError):
    pass


class TailNotConverged(DivisorError):
    pass


class PsiUnavailable(DivisorError):
    pass


class RouteUnavailable(DivisorError):
    """The requested fractional-power route does not apply to this distribution."""


class AliasingSuspected(DivisorError):
    pass


class PointsOutOfRange(DivisorError):
    pass


class SpotCheckFailed(DivisorError):
    def __init__(self, message, t=None):
        self.t = t
        super().__init__(message)
