"""Shared exception types."""


class ParatypeError(Exception):
    """Base class for errors raised by this package."""


class ParseError(ParatypeError):
    """Malformed input that prevents a file or record from being read."""


class ValidationError(ParatypeError):
    """Arguments or state that violate a documented precondition."""
