"""Exception hierarchy for ddip-otfs-lab."""

from __future__ import annotations


class DdipOtfsError(Exception):
    """Base class for all errors raised by ddipotfs."""


class ParameterError(DdipOtfsError, ValueError):
    """A parameter violates a bound or a feasibility constraint."""


class InputSizeError(DdipOtfsError, ValueError):
    """An input does not have the length the operation requires."""


class DegenerateModelError(DdipOtfsError):
    """The linear model cannot be processed (e.g. a zero column in H)."""


class EmptyResultError(DdipOtfsError):
    """A result was requested from data that was never collected."""


class ConfigError(DdipOtfsError):
    """Configuration file missing, malformed, or invalid."""

    def __init__(self, message: str, *, key: str | None = None):
        super().__init__(message)
        self.key = key


class TrialError(DdipOtfsError):
    """An error raised inside a Monte Carlo trial, tagged with its frame."""

    def __init__(self, message: str, *, frame: int, snr_db: float):
        super().__init__(f"frame {frame} at {snr_db:g} dB: {message}")
        self.frame = frame
        self.snr_db = snr_db
