"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class UsageProfilesError(Exception):
    """Base class for all errors raised by usage_profiles."""


class LogParseError(UsageProfilesError):
    """A single access-log line could not be parsed."""

    def __init__(self, reason: str, line_no: int = 0) -> None:
        super().__init__(f"line {line_no}: {reason}")
        self.reason = reason
        self.line_no = line_no


class ConfigError(UsageProfilesError, ValueError):
    """Invalid configuration, raised before any stage runs."""


class DataError(UsageProfilesError, ValueError):
    """The data cannot support the requested computation."""


class StageError(UsageProfilesError):
    """A pipeline stage failed; wraps the underlying cause."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
