"""Exception types shared across the package."""


class TexhopError(Exception):
    """Base class for errors raised by this package."""


class FormatError(TexhopError):
    """A file or byte stream is not in the expected format."""


class SamplingError(TexhopError):
    """Core sampling failed (e.g. the rejection cap was exhausted)."""
