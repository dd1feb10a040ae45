"""Exception types shared across the package."""


class SparsekitError(Exception):
    """Base class for all errors raised by sparsekit."""


class FormatError(SparsekitError):
    """A file does not carry the expected magic bytes or version."""


class TruncatedError(SparsekitError):
    """A file ended before its declared payload was fully read."""


class ValidationError(SparsekitError):
    """A value, tensor, or parameter violates a documented invariant."""
