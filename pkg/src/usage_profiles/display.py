"""Helpers for rendering errors and status messages on the terminal."""

from __future__ import annotations

import sys
from typing import TextIO

from .exceptions import (
    ConfigError,
    DataError,
    LogParseError,
    StageError,
    UsageProfilesError,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


def _root_cause(exc: BaseException) -> BaseException:
    while isinstance(exc, StageError):
        exc = exc.cause
    return exc


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the process exit code."""
    cause = _root_cause(exc)
    if isinstance(cause, ConfigError):
        return EXIT_VALIDATION
    if isinstance(cause, OSError):
        return EXIT_IO
    return EXIT_RUNTIME


def render_error(exc: BaseException) -> str:
    """Return a one-block, human-readable description of ``exc``."""
    cause = _root_cause(exc)

    if isinstance(cause, ConfigError):
        category = "Configuration Error"
    elif isinstance(cause, LogParseError):
        category = "Log Parse Error"
    elif isinstance(cause, DataError):
        category = "Data Error"
    elif isinstance(cause, OSError):
        category = "I/O Error"
    elif isinstance(cause, UsageProfilesError):
        category = "Error"
    else:
        category = "Unexpected Error"

    lines = [f"{category}: {type(cause).__name__}: {cause}"]
    if isinstance(exc, StageError):
        lines.append(f"  during stage: {exc.stage}")
    if isinstance(cause, OSError) and cause.filename:
        lines.append(f"  path: {cause.filename}")
    return "\n".join(lines)


def echo(message: str, stream: TextIO | None = None) -> None:
    """Write a status or error message to stderr (or ``stream``)."""
    print(message, file=stream or sys.stderr)
