"""Exception hierarchy shared by all owlmmv modules."""


class OwlError(Exception):
    """Base class for errors raised by owlmmv."""


class InvalidInputError(OwlError, ValueError):
    """Input matrix or parameter violates a precondition."""


class DimensionMismatchError(InvalidInputError):
    """Operand shapes are not conformable."""


class SizeLimitError(InvalidInputError):
    """Input is too large for a brute-force utility."""


class RankDeficiencyError(OwlError):
    """The metric matrix ``gamma*I + (1-gamma)*Z^T Z`` is (numerically) singular.

    Attributes
    ----------
    cond : float
        Condition estimate of the offending matrix (``inf`` if singular).
    """

    def __init__(self, message, cond=float("inf")):
        super().__init__(message)
        self.cond = cond


class LineSearchError(OwlError):
    """Backtracking exhausted without finding an acceptable step."""


class CsvParseError(InvalidInputError):
    """Malformed matrix CSV file."""

    def __init__(self, message, line=None, path=None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}" if loc else f"line {line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.line = line
        self.path = path
