"""Synthetic access logs and planted-group data with known structure."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .log_ingest import LogRecord
from .sessionizer import Session, dedup_session

logger = logging.getLogger(__name__)

SITE = "http://www.example.edu"
START_TS = 1296518400.0  # 2011-02-01T00:00:00Z

BROWSERS = (
    "Mozilla/5.0 (Windows NT 6.1; rv:2.0) Gecko/20100101 Firefox/4.0",
    "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/534.16 Chrome/10.0.648",
    "Mozilla/4.0 (compatible; MSIE 8.0; Windows NT 5.1)",
    "Opera/9.80 (Windows NT 6.1; U; en) Presto/2.7.62 Version/11.01",
)

ROBOTS = (
    "Mozilla/5.0 (compatible; Googlebot/2.1; +http://www.google.com/bot.html)",
    "msnbot/2.0b (+http://search.msn.com/msnbot.htm)",
)


@dataclass(frozen=True)
class CorpusSpec:
    groups: int = 4
    sessions_per_group: int = 50
    noise_sessions: int = 150
    urls_per_group: int = 8
    min_urls: int = 5
    max_urls: int = 8
    image_rate: float = 0.5
    robot_sessions: int = 3
    malformed_lines: int = 2


def group_url(group: int, page: int) -> str:
    return f"{SITE}/dept{group + 1}/page{page + 1}.php"


def _request(ts: float, ip: str, agent: str, url: str, rng: np.random.Generator) -> LogRecord:
    return LogRecord(
        timestamp=round(ts, 3),
        elapsed_ms=int(rng.integers(50, 3000)),
        client_ip=ip,
        result_tag="TCP_MISS",
        status_code=200,
        bytes=int(rng.integers(200, 40000)),
        method="GET",
        url=url,
        user_agent=agent,
        hierarchy="DEFAULT_PARENT/192.168.20.1",
    )


def generate_log(seed: int = 0, spec: CorpusSpec = CorpusSpec()) -> list[str]:
    """
    Log lines for planted navigation groups plus short noise visits.

    Every visit comes from its own IP and lasts under 30 minutes, so each
    visit is exactly one session under both heuristics with the default
    threshold. Page views are followed by embedded image requests, a few
    robot visits (one of which fetches ``robots.txt``) are mixed in, and
    some lines are truncated.
    """
    rng = np.random.default_rng(seed)
    records: list[LogRecord] = []
    visits: list[list[str]] = []
    for g in range(spec.groups):
        for _ in range(spec.sessions_per_group):
            size = int(rng.integers(spec.min_urls, spec.max_urls + 1))
            pages = rng.choice(spec.urls_per_group, size=size, replace=False)
            visits.append([group_url(g, int(p)) for p in pages])
    all_urls = [group_url(g, p) for g in range(spec.groups) for p in range(spec.urls_per_group)]
    for _ in range(spec.noise_sessions):
        size = int(rng.integers(1, 3))
        visits.append([all_urls[int(k)] for k in rng.choice(len(all_urls), size=size, replace=False)])

    for n, pages in enumerate(visits):
        ip = f"10.{n // 250 % 256}.{n % 250}.{1 + n % 7}"
        agent = BROWSERS[n % len(BROWSERS)]
        ts = START_TS + n * 300.0 + float(rng.uniform(0, 120))
        for url in pages:
            records.append(_request(ts, ip, agent, url, rng))
            if rng.random() < spec.image_rate:
                records.append(_request(ts + 0.2, ip, agent, f"{SITE}/img/logo{n % 5}.gif", rng))
            ts += float(rng.uniform(10, 240))

    for r in range(spec.robot_sessions):
        ip = f"66.249.{r}.1"
        agent = ROBOTS[r % len(ROBOTS)]
        ts = START_TS + 3600.0 * (r + 1)
        for url in all_urls[: spec.urls_per_group]:
            records.append(_request(ts, ip, agent, url, rng))
            ts += 1.0
    # A crawler without a robot user agent that announces itself via robots.txt.
    ts = START_TS + 7200.5
    for url in [f"{SITE}/robots.txt", *all_urls[:3]]:
        records.append(_request(ts, "172.16.0.9", "Java/1.6.0_17", url, rng))
        ts += 2.0

    records.sort(key=lambda rec: rec.timestamp)
    lines = [rec.to_line() for rec in records]
    for _ in range(spec.malformed_lines):
        at = int(rng.integers(0, len(lines)))
        lines.insert(at, " ".join(lines[at].split()[:4]))
    logger.info("generated %d log lines (%d visits)", len(lines), len(visits))
    return lines


def planted_sessions(
    seed: int = 0, spec: CorpusSpec = CorpusSpec()
) -> tuple[list[Session], np.ndarray]:
    """
    Sessions over url ids ``1..groups*urls_per_group`` with group labels.

    Group visits draw ``min_urls..max_urls`` distinct pages of their group;
    noise visits (label ``-1``) draw one or two pages from the whole site.
    """
    rng = np.random.default_rng(seed)
    n_urls = spec.groups * spec.urls_per_group
    sessions: list[Session] = []
    labels: list[int] = []

    def add(pages: np.ndarray, label: int) -> None:
        n = len(sessions)
        sessions.append(
            dedup_session(
                Session(
                    user_key=(f"IP{n + 1}", "UA1"),
                    ordinal=1,
                    first_ts=START_TS + n * 3600.0,
                    last_ts=START_TS + n * 3600.0 + 60.0 * (len(pages) - 1),
                    raw_requests=tuple(int(p) + 1 for p in pages),
                )
            )
        )
        labels.append(label)

    for g in range(spec.groups):
        for _ in range(spec.sessions_per_group):
            size = int(rng.integers(spec.min_urls, spec.max_urls + 1))
            add(g * spec.urls_per_group + rng.choice(spec.urls_per_group, size=size, replace=False), g)
    for _ in range(spec.noise_sessions):
        add(rng.choice(n_urls, size=int(rng.integers(1, 3)), replace=False), -1)
    return sessions, np.asarray(labels)


def planted_blobs(
    seed: int = 0,
    blobs: int = 4,
    points_per_blob: int = 20,
    separation: float = 20.0,
    radius: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """2-D points in ``blobs`` discs of ``radius`` whose centres are ``separation`` apart."""
    rng = np.random.default_rng(seed)
    side = int(np.ceil(np.sqrt(blobs)))
    centres = np.array([(separation * (k % side), separation * (k // side)) for k in range(blobs)])
    angle = rng.uniform(0, 2 * np.pi, size=(blobs, points_per_blob))
    dist = radius * np.sqrt(rng.uniform(0, 1, size=(blobs, points_per_blob)))
    offsets = np.stack([dist * np.cos(angle), dist * np.sin(angle)], axis=-1)
    X = (centres[:, None, :] + offsets).reshape(-1, 2)
    labels = np.repeat(np.arange(blobs), points_per_blob)
    return X, labels
