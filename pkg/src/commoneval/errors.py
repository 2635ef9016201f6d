"""Exception hierarchy shared across the toolkit."""


class CommonevalError(Exception):
    """Base class for toolkit errors."""


class ParseError(CommonevalError, ValueError):
    """Malformed input file. ``line`` is 1-based, or None when not line-specific."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class DomainError(CommonevalError, ValueError):
    """An argument is outside the domain of an operation."""


class UndefinedMetricError(DomainError):
    """A metric has no defined value for the given input (e.g. zero mean exposure)."""
