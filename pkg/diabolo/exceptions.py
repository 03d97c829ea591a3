"""
Custom exceptions and error types for django-diabolo.
"""

from enum import Enum


class ExitCode(Enum):
    """Process exit codes used by the management commands."""

    SUCCESS = 0
    CONFIG_ERROR = 1
    DATA_ERROR = 2

    def __str__(self) -> str:
        return str(self.value)


class DiaboloError(Exception):
    """Base class for all errors raised by the diabolo app."""


class InputError(DiaboloError, ValueError):
    """Invalid numeric input, e.g. non-finite vectors or sticks further apart than the string."""


class DegenerateGeometryError(DiaboloError, ValueError):
    """Geometry is too thin or aligned for a well-conditioned normal."""


class TimeRangeError(DiaboloError, ValueError):
    """A trajectory was sampled outside of its time span."""


class MatchError(DiaboloError):
    """A waypoint could not be matched to a time in the rollout."""


class NotResetError(DiaboloError, RuntimeError):
    """The environment was stepped before reset()."""


class ConfigError(DiaboloError, ValueError):
    """Invalid configuration. Maps to exit code 1."""

    exit_code = ExitCode.CONFIG_ERROR


class UnknownPatternError(ConfigError):
    """Unknown goal pattern or motion template name."""


class DataError(DiaboloError):
    """Invalid or insufficient recorded data. Maps to exit code 2."""

    exit_code = ExitCode.DATA_ERROR


class TraceFormatError(DataError, ValueError):
    """Malformed trace file (header, column count, timestamps)."""


class EmptyTraceError(DataError, ValueError):
    """Trace without usable samples."""
