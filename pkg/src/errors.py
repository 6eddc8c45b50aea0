from typing import Optional


class JourneyDetectorError(Exception):
    """Base class for all errors raised by the journey detector."""


class InvalidInputError(JourneyDetectorError, ValueError):
    """Input violates an operation's precondition."""


class OrderingError(InvalidInputError):
    """Timestamps or records arrived out of order."""


class ValidationError(InvalidInputError):
    """A field is outside its allowed range."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class TraceParseError(InvalidInputError):
    """A trace file row could not be parsed."""

    def __init__(self, path: str, line: int, field: Optional[str], message: str):
        location = f"{path}:{line}"
        if field:
            location += f" ({field})"
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line
        self.field = field


class InsufficientDataError(InvalidInputError):
    """Too few samples for a fit or statistic."""


class SpanMismatchError(InvalidInputError):
    """Two timelines do not cover the same span."""


class ConfigError(JourneyDetectorError):
    """Malformed configuration file or unknown key."""
