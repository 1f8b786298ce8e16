"""User identification and time-oriented sessionization."""

from __future__ import annotations

import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .exceptions import ConfigError, DataError
from .log_ingest import CleanedRecord

logger = logging.getLogger(__name__)

DEFAULT_BETA_SECONDS = 1800.0

UserKey = tuple[str, str]


class Heuristic(str, enum.Enum):
    """TOH1 bounds the whole visit, TOH2 bounds the gap between two requests."""

    TOH1 = "toh1"
    TOH2 = "toh2"


def format_user_key(user_key: UserKey) -> str:
    return "/".join(user_key)


def parse_user_key(text: str) -> UserKey:
    ip_alias, sep, ua_alias = text.partition("/")
    if not sep:
        raise ValueError(f"malformed user key: {text!r}")
    return (ip_alias, ua_alias)


@dataclass(frozen=True)
class UserActivity:
    user_key: UserKey
    requests: tuple[CleanedRecord, ...]


@dataclass(frozen=True)
class Session:
    """
    One visit of one user.

    ``url_freqs`` keeps one entry per distinct url id, in first-occurrence
    order, mapped to its number of occurrences in ``raw_requests``.
    """

    user_key: UserKey
    ordinal: int
    first_ts: float
    last_ts: float
    raw_requests: tuple[int, ...]
    url_freqs: Mapping[int, int] = field(default_factory=dict)
    weight: float = 1.0

    @property
    def session_id(self) -> tuple[UserKey, int]:
        return (self.user_key, self.ordinal)

    @property
    def unique_count(self) -> int:
        return len(self.url_freqs)

    @property
    def label(self) -> str:
        return f"{format_user_key(self.user_key)}-S{self.ordinal}"


@dataclass(frozen=True)
class SessionStats:
    session_count: int
    min_raw: int
    max_raw: int
    avg_raw: float
    min_unique: int
    max_unique: int
    avg_unique: float


def identify_users(records: Iterable[CleanedRecord]) -> list[UserActivity]:
    """Group time-ordered records by (IP alias, UA alias), users in first-seen order."""
    grouped: dict[UserKey, list[CleanedRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.user_key, []).append(rec)
    return [UserActivity(key, tuple(reqs)) for key, reqs in grouped.items()]


def dedup_session(s: Session) -> Session:
    """Recount ``url_freqs`` from ``raw_requests``."""
    return replace(s, url_freqs=dict(Counter(s.raw_requests)))


def sessionize(
    user: UserActivity,
    heuristic: Heuristic | str = Heuristic.TOH1,
    beta_s: float = DEFAULT_BETA_SECONDS,
) -> list[Session]:
    """
    Split one user's requests into sessions.

    The boundary is inclusive: a request whose distance to the reference time
    (session start for TOH1, previous request for TOH2) equals ``beta_s`` stays
    in the current session.
    """
    heuristic = Heuristic(heuristic)
    if not beta_s > 0:
        raise ConfigError(f"beta must be positive, got {beta_s}")

    groups: list[list[CleanedRecord]] = []
    for rec in user.requests:
        if groups:
            current = groups[-1]
            ref = current[0] if heuristic is Heuristic.TOH1 else current[-1]
            if rec.timestamp - ref.timestamp <= beta_s:
                current.append(rec)
                continue
        groups.append([rec])

    return [
        dedup_session(
            Session(
                user_key=user.user_key,
                ordinal=ordinal,
                first_ts=group[0].timestamp,
                last_ts=group[-1].timestamp,
                raw_requests=tuple(r.url_id for r in group),
            )
        )
        for ordinal, group in enumerate(groups, 1)
    ]


def sessionize_all(
    users: Iterable[UserActivity],
    heuristic: Heuristic | str = Heuristic.TOH1,
    beta_s: float = DEFAULT_BETA_SECONDS,
) -> list[Session]:
    sessions = [s for user in users for s in sessionize(user, heuristic, beta_s)]
    logger.info("%s (beta=%gs): %d sessions", Heuristic(heuristic).value, beta_s, len(sessions))
    return sessions


def session_stats(sessions: Sequence[Session]) -> SessionStats:
    if not sessions:
        raise DataError("no sessions")
    raw = [len(s.raw_requests) for s in sessions]
    unique = [s.unique_count for s in sessions]
    return SessionStats(
        session_count=len(sessions),
        min_raw=min(raw),
        max_raw=max(raw),
        avg_raw=math.fsum(raw) / len(raw),
        min_unique=min(unique),
        max_unique=max(unique),
        avg_unique=math.fsum(unique) / len(unique),
    )
