"""Access-log parsing, cleaning, anonymisation and URL interning.

Input lines use the squid-native layout::

    1212265085.247 741 192.168.23.62 TCP_MISS/200 10858 GET http://host/index.php - DEFAULT_PARENT/192.168.20.1 Mozilla/5.0

``clean_log`` turns a stream of such lines into time-ordered
:class:`CleanedRecord` objects whose IPs and user agents are replaced by
first-seen aliases (``IP1``, ``UA1``, ...) and whose URLs are replaced by
dense integer ids held in a :class:`UrlMap`.
"""

from __future__ import annotations

import enum
import logging
import math
import pathlib
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Iterator, Optional
from urllib.parse import urlsplit, urlunsplit

from .exceptions import LogParseError

logger = logging.getLogger(__name__)

DEFAULT_SUFFIXES = frozenset(
    {"gif", "jpeg", "GIF", "JPEG", "jpg", "JPG", "map", "css", "js", "png", "ico"}
)

DEFAULT_ROBOT_AGENTS = frozenset(
    {
        "bot", "crawler", "spider", "slurp", "googlebot", "bingbot", "msnbot",
        "yandex", "baiduspider", "duckduckbot", "teoma", "ia_archiver",
        "archive.org_bot", "facebookexternalhit", "ahrefsbot", "semrushbot",
        "mj12bot", "wget", "curl", "python-requests", "libwww-perl",
    }
)

DEFAULT_ROBOT_URL_MARKERS = frozenset({"robots.txt"})

_FIELD_COUNT = 10

# Double-quoted runs are one token; everything else splits on whitespace.
_TOKEN_RE = re.compile(r'"[^"]*"|\S+')

# Last second datetime can render.
_MAX_TIMESTAMP = datetime(9999, 12, 31, 23, 59, 59, tzinfo=timezone.utc).timestamp()


@dataclass(frozen=True)
class LogRecord:
    """One parsed access-log line."""

    timestamp: float
    elapsed_ms: int
    client_ip: str
    result_tag: str
    status_code: int
    bytes: int
    method: str
    url: str
    user_agent: str
    ident: str = "-"
    hierarchy: str = "-"
    content_type: str = "-"

    @property
    def identity(self) -> tuple[str, str]:
        """The raw (IP, user agent) pair identifying a user."""
        return (self.client_ip, self.user_agent)

    def to_line(self) -> str:
        """Render the record back in the 10-field log layout."""
        agent = self.user_agent
        if re.search(r"\s", agent):
            agent = f'"{agent}"'
        return " ".join(
            [
                f"{self.timestamp:.3f}",
                str(self.elapsed_ms),
                self.client_ip,
                f"{self.result_tag}/{self.status_code}",
                str(self.bytes),
                self.method,
                self.url,
                self.ident,
                self.hierarchy,
                agent,
            ]
        )


@dataclass(frozen=True)
class CleanedRecord:
    """A kept, anonymised log record with its URL replaced by an id."""

    timestamp: float
    ip_alias: str
    ua_alias: str
    elapsed_ms: int
    bytes: int
    url_id: int

    @property
    def user_key(self) -> tuple[str, str]:
        return (self.ip_alias, self.ua_alias)


class DropReason(str, enum.Enum):
    SUFFIX = "suffix"
    ROBOT = "robot"
    STATUS = "status"


@dataclass(frozen=True)
class Verdict:
    """Outcome of :func:`clean_record`: a kept record or a drop reason."""

    record: Optional[LogRecord] = None
    reason: Optional[DropReason] = None

    @property
    def kept(self) -> bool:
        return self.reason is None


def _read_list_file(path: str | pathlib.Path) -> list[str]:
    """Read one entry per line, ignoring blank lines and ``#`` comments."""
    entries = []
    for raw in pathlib.Path(path).read_text(encoding="utf-8").splitlines():
        entry = raw.split("#", 1)[0].strip()
        if entry:
            entries.append(entry)
    return entries


@dataclass(frozen=True)
class CleanPolicy:
    """What the cleaning step removes."""

    irrelevant_suffixes: frozenset[str] = DEFAULT_SUFFIXES
    robot_agents: frozenset[str] = DEFAULT_ROBOT_AGENTS
    robot_url_markers: frozenset[str] = DEFAULT_ROBOT_URL_MARKERS
    strip_query: bool = True
    status_filter: Optional[frozenset[int]] = None

    def __post_init__(self) -> None:
        # Agent matching is case-insensitive; normalise once.
        object.__setattr__(
            self, "robot_agents", frozenset(a.lower() for a in self.robot_agents)
        )

    @classmethod
    def from_files(
        cls,
        suffixes_file: Optional[str] = None,
        robots_file: Optional[str] = None,
        strip_query: bool = True,
        keep_status: Optional[Iterable[int]] = None,
    ) -> "CleanPolicy":
        """Build a policy from list files, falling back to the built-in lists."""
        suffixes = (
            frozenset(s.lstrip(".") for s in _read_list_file(suffixes_file))
            if suffixes_file
            else DEFAULT_SUFFIXES
        )
        robots = frozenset(_read_list_file(robots_file)) if robots_file else DEFAULT_ROBOT_AGENTS
        return cls(
            irrelevant_suffixes=suffixes,
            robot_agents=robots,
            strip_query=strip_query,
            status_filter=frozenset(keep_status) if keep_status is not None else None,
        )


class UrlMap:
    """Bijective url string <-> dense positive id map, ids in first-seen order."""

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._urls: list[str] = []

    def intern(self, url: str) -> int:
        url_id = self._ids.get(url)
        if url_id is None:
            self._urls.append(url)
            url_id = len(self._urls)
            self._ids[url] = url_id
        return url_id

    def id_of(self, url: str) -> int:
        return self._ids[url]

    def url_of(self, url_id: int) -> str:
        if url_id < 1:
            raise KeyError(url_id)
        return self._urls[url_id - 1]

    def items(self) -> Iterator[tuple[int, str]]:
        return ((i, url) for i, url in enumerate(self._urls, 1))

    def __contains__(self, url_id: object) -> bool:
        return isinstance(url_id, int) and 1 <= url_id <= len(self._urls)

    def __len__(self) -> int:
        return len(self._urls)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, UrlMap) and self._urls == other._urls

    def __repr__(self) -> str:
        return f"UrlMap({len(self)} urls)"


@dataclass
class CleanStats:
    input_lines: int = 0
    parse_errors: int = 0
    dropped_suffix: int = 0
    dropped_robot: int = 0
    dropped_status: int = 0
    kept: int = 0

    @property
    def consistent(self) -> bool:
        return self.input_lines == (
            self.parse_errors
            + self.dropped_suffix
            + self.dropped_robot
            + self.dropped_status
            + self.kept
        )

    def count_drop(self, reason: DropReason) -> None:
        attr = f"dropped_{reason.value}"
        setattr(self, attr, getattr(self, attr) + 1)


@dataclass
class AliasState:
    """First-seen alias tables plus the URL map, threaded through one pass."""

    ip_aliases: dict[str, str] = field(default_factory=dict)
    ua_aliases: dict[str, str] = field(default_factory=dict)
    url_map: UrlMap = field(default_factory=UrlMap)

    def alias_ip(self, ip: str) -> str:
        return self.ip_aliases.setdefault(ip, f"IP{len(self.ip_aliases) + 1}")

    def alias_ua(self, agent: str) -> str:
        return self.ua_aliases.setdefault(agent, f"UA{len(self.ua_aliases) + 1}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def _non_negative_int(token: str, reason: str, line_no: int) -> int:
    if not (token.isascii() and token.isdigit()):
        raise LogParseError(reason, line_no)
    return int(token)


def parse_log_line(line: str, line_no: int = 0) -> LogRecord:
    """
    Parse one squid-native access-log line.

    Raises
    ------
    LogParseError
        With ``reason`` one of ``empty``, ``field count``, ``timestamp``,
        ``elapsed``, ``status``, ``bytes`` or ``url``.
    """
    tokens = _TOKEN_RE.findall(line.strip())
    if not tokens:
        raise LogParseError("empty", line_no)
    if len(tokens) < _FIELD_COUNT:
        raise LogParseError("field count", line_no)

    try:
        timestamp = float(tokens[0])
    except ValueError:
        raise LogParseError("timestamp", line_no) from None
    if not (math.isfinite(timestamp) and 0 < timestamp <= _MAX_TIMESTAMP):
        raise LogParseError("timestamp", line_no)

    elapsed_ms = _non_negative_int(tokens[1], "elapsed", line_no)

    tag, sep, status = tokens[3].rpartition("/")
    if not sep or not (status.isascii() and status.isdigit()):
        raise LogParseError("status", line_no)

    size = _non_negative_int(tokens[4], "bytes", line_no)

    url = tokens[6]
    if not url or url == "-":
        raise LogParseError("url", line_no)

    content_type = "-"
    agent = tokens[9]
    if len(agent) > 1 and agent.startswith('"') and agent.endswith('"'):
        user_agent = agent[1:-1]
        if len(tokens) > _FIELD_COUNT:
            content_type = tokens[10]
    else:
        user_agent = " ".join(tokens[9:])

    return LogRecord(
        timestamp=timestamp,
        elapsed_ms=elapsed_ms,
        client_ip=tokens[2],
        result_tag=tag,
        status_code=int(status),
        bytes=size,
        method=tokens[5],
        url=url,
        user_agent=user_agent,
        ident=tokens[7],
        hierarchy=tokens[8],
        content_type=content_type,
    )


def _url_suffix(url: str) -> str:
    last = urlsplit(url).path.rsplit("/", 1)[-1]
    return last.rsplit(".", 1)[1] if "." in last else ""


def clean_record(rec: LogRecord, policy: CleanPolicy) -> Verdict:
    """Apply query stripping and the suffix / robot / status filters to one record."""
    if policy.strip_query:
        parts = urlsplit(rec.url)
        if parts.query or parts.fragment:
            rec = replace(rec, url=urlunsplit(parts._replace(query="", fragment="")))

    if _url_suffix(rec.url) in policy.irrelevant_suffixes:
        return Verdict(reason=DropReason.SUFFIX)

    agent = rec.user_agent.lower()
    if any(token in agent for token in policy.robot_agents):
        return Verdict(reason=DropReason.ROBOT)
    if any(marker in rec.url for marker in policy.robot_url_markers):
        return Verdict(reason=DropReason.ROBOT)

    if policy.status_filter is not None and rec.status_code not in policy.status_filter:
        return Verdict(reason=DropReason.STATUS)

    return Verdict(record=rec)


def anonymize_and_map(rec: LogRecord, state: AliasState) -> CleanedRecord:
    """Replace IP / user agent by first-seen aliases and intern the URL."""
    return CleanedRecord(
        timestamp=rec.timestamp,
        ip_alias=state.alias_ip(rec.client_ip),
        ua_alias=state.alias_ua(rec.user_agent),
        elapsed_ms=rec.elapsed_ms,
        bytes=rec.bytes,
        url_id=state.url_map.intern(rec.url),
    )


def clean_log(
    lines: Iterable[str],
    policy: Optional[CleanPolicy] = None,
) -> tuple[list[CleanedRecord], UrlMap, CleanStats]:
    """
    Clean a whole log.

    Any (IP, user agent) pair that ever requests a robot URL marker is treated
    as a robot: its otherwise-kept records are counted as ``dropped_robot``.
    Aliasing runs over the kept records in timestamp order (stable on ties).
    """
    policy = policy or CleanPolicy()
    stats = CleanStats()
    kept: list[LogRecord] = []
    robot_identities: set[tuple[str, str]] = set()

    for line_no, line in enumerate(lines, 1):
        stats.input_lines += 1
        try:
            rec = parse_log_line(line, line_no)
        except LogParseError as exc:
            stats.parse_errors += 1
            logger.debug("skipping %s", exc)
            continue

        verdict = clean_record(rec, policy)
        if verdict.kept:
            kept.append(verdict.record)  # type: ignore[arg-type]
            continue
        stats.count_drop(verdict.reason)  # type: ignore[arg-type]
        if verdict.reason is DropReason.ROBOT and any(
            marker in rec.url for marker in policy.robot_url_markers
        ):
            robot_identities.add(rec.identity)

    if robot_identities:
        survivors = [r for r in kept if r.identity not in robot_identities]
        stats.dropped_robot += len(kept) - len(survivors)
        kept = survivors

    kept.sort(key=lambda r: r.timestamp)
    state = AliasState()
    cleaned = [anonymize_and_map(rec, state) for rec in kept]
    stats.kept = len(cleaned)

    logger.info(
        "cleaned %d lines: kept=%d parse_errors=%d suffix=%d robot=%d status=%d",
        stats.input_lines,
        stats.kept,
        stats.parse_errors,
        stats.dropped_suffix,
        stats.dropped_robot,
        stats.dropped_status,
    )
    return cleaned, state.url_map, stats


def read_log(path: str | pathlib.Path) -> list[str]:
    """Read a raw access log; I/O errors propagate."""
    with open(path, encoding="utf-8", errors="replace") as fh:
        return fh.read().splitlines()
