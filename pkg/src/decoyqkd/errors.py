"""Exception hierarchy.

The CLI maps each family onto one exit code, so new errors should subclass
the family they belong to rather than ``DecoyQKDError`` directly.
"""


class DecoyQKDError(Exception):
    """Base class for every error raised by this package."""


class ParseError(DecoyQKDError, ValueError):
    """Malformed profile or records file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class NumericError(DecoyQKDError, ValueError):
    """A numerical routine could not produce a value (bad bracket, no crossing, ...)."""


class NoSignChangeError(NumericError):
    pass


class NoCrossingError(NumericError):
    pass


class MissingEstimateError(NumericError):
    pass


class EstimationError(DecoyQKDError):
    """Single-photon estimation failed on the supplied records."""


class InsufficientRecordsError(EstimationError):
    pass


class IllConditionedError(EstimationError):
    pass


class InfeasibleRecordsError(EstimationError):
    pass
