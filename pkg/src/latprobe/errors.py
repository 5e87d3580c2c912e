"""Exception types shared across the package."""


class LatprobeError(Exception):
    """Base class for all package errors."""


class FormatError(LatprobeError):
    """File content does not conform to the expected on-disk format."""


class UnsupportedDtype(LatprobeError):
    """Array file declares a dtype outside the supported set."""


class IoError(LatprobeError):
    """Filesystem operation failed (unwritable path, missing file, ...)."""


class EmptyInput(LatprobeError):
    """An operation received an empty collection or zero-sized array."""


class InvalidArgument(LatprobeError):
    """Argument violates an operation's precondition."""


class ShapeError(LatprobeError):
    """Array dimensions do not match what the operation requires."""


class DegenerateInput(LatprobeError):
    """Input is degenerate for the requested statistic (e.g. zero variance)."""
