"""Exception types raised by specden.

Each class maps to one CLI exit code (see :mod:`specden.cli`).
"""


class SpecdenError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(SpecdenError, ValueError):
    exit_code = 2


class DataError(SpecdenError):
    exit_code = 3


class DimensionError(DataError, ValueError):
    """Shapes, grids or sample sizes do not agree."""


class DomainError(DataError, ValueError):
    """An argument lies outside the domain of the operation."""


class TimeIndexError(DataError, IndexError):
    pass


class DegeneratePointError(DataError, ValueError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateTruthError(DataError, ZeroDivisionError):
    pass


class ParseError(DataError, ValueError):
    """Malformed file; ``offset`` is the byte position where reading failed."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class TruncatedFileError(ParseError):
    pass


class NotPositiveDefiniteError(DataError, ValueError):
    pass


class DivergenceError(SpecdenError, FloatingPointError):
    exit_code = 4

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class MemoryCapError(SpecdenError, MemoryError):
    exit_code = 5

    def __init__(self, message, estimate_bytes=None, cap_bytes=None):
        super().__init__(message)
        self.estimate_bytes = estimate_bytes
        self.cap_bytes = cap_bytes
