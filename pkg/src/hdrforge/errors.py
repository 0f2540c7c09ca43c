"""Exception types shared across the toolkit.

Every error raised by the public API is one of these, so callers (and the
CLI exit-code mapping) can dispatch on kind rather than on message text.
"""


class HdrForgeError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(HdrForgeError, ValueError):
    """A parameter is out of range, malformed, or inconsistent with another."""


class InsufficientDataError(HdrForgeError):
    """Not enough observations to determine the requested solution."""


class NumericalFailureError(HdrForgeError):
    """A computation degenerated (singular system, zero dynamic range, ...)."""


class ParseError(HdrForgeError):
    """A file could not be decoded.  ``offset`` is the byte position when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedFormatError(HdrForgeError):
    """The file is recognized but uses a variant this toolkit does not handle."""
