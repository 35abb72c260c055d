"""Exception hierarchy shared across the package."""


class OsddError(Exception):
    """Base class for all errors raised by this package."""


class SolverLimitError(OsddError):
    """A constraint query exceeded the exhaustive-search budget.

    Raised instead of silently returning an approximate answer; callers
    that hit this should shrink the instance, not trust a guess.
    """


class DiagramError(OsddError):
    """A decision diagram violates a structural precondition."""


class ParseError(OsddError):
    """Source text could not be parsed."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class EvalError(OsddError):
    """Query evaluation failed (bad goal, undeclared switch, depth limit)."""


class OracleError(OsddError):
    """Brute-force enumeration could not produce an answer."""


class UsageError(OsddError):
    """Bad command-line or configuration input."""
