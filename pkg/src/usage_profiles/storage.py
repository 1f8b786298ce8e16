"""Readers and writers for the intermediate artifacts of a run.

Every writer has a matching reader, and reading a file then writing it again
gives the same bytes.
"""

from __future__ import annotations

import json
import pathlib
from dataclasses import asdict
from datetime import datetime, timezone
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.sparse as sp

from .exceptions import DataError
from .features import Scheme, SessionMatrix
from .fcm import FcmModel, Profile
from .log_ingest import CleanedRecord, CleanStats, UrlMap
from .sessionizer import Session, UserActivity, dedup_session, format_user_key, parse_user_key

PathLike = str | pathlib.Path

CLEANED_COLUMNS = ["Time", "IP", "UserAgent", "ElapsedTime", "Bytes", "URL"]
SESSION_COLUMNS = ["user_key", "ordinal", "first_ts", "last_ts", "raw"]

# Read everything as text; conversion is explicit.
_TEXT = dict(sep="\t", dtype=str, keep_default_na=False)


def _ensure_parent(path: PathLike) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def format_epoch(ts: float) -> str:
    return f"{ts:.3f}"


def format_log_time(ts: float) -> str:
    """Render an epoch timestamp as ``YYYYMMDDHHMMSS`` (UTC)."""
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y%m%d%H%M%S")


# ---------------------------------------------------------------------------
# Cleaning
# ---------------------------------------------------------------------------

def write_cleaned(records: Sequence[CleanedRecord], path: PathLike) -> None:
    df = pd.DataFrame(
        [
            (format_epoch(r.timestamp), r.ip_alias, r.ua_alias, r.elapsed_ms, r.bytes, r.url_id)
            for r in records
        ],
        columns=CLEANED_COLUMNS,
    )
    df.to_csv(_ensure_parent(path), sep="\t", index=False)


def read_cleaned(path: PathLike) -> list[CleanedRecord]:
    df = pd.read_csv(path, **_TEXT)
    if list(df.columns) != CLEANED_COLUMNS:
        raise DataError(f"{path}: expected columns {CLEANED_COLUMNS}, got {list(df.columns)}")
    return [
        CleanedRecord(
            timestamp=float(row.Time),
            ip_alias=row.IP,
            ua_alias=row.UserAgent,
            elapsed_ms=int(row.ElapsedTime),
            bytes=int(row.Bytes),
            url_id=int(row.URL),
        )
        for row in df.itertuples(index=False)
    ]


def write_url_map(url_map: UrlMap, path: PathLike) -> None:
    df = pd.DataFrame(list(url_map.items()), columns=["url_id", "url"])
    df.to_csv(_ensure_parent(path), sep="\t", index=False, header=False)


def read_url_map(path: PathLike) -> UrlMap:
    url_map = UrlMap()
    if pathlib.Path(path).stat().st_size == 0:
        return url_map
    df = pd.read_csv(path, header=None, names=["url_id", "url"], **_TEXT)
    for expected, row in enumerate(df.itertuples(index=False), 1):
        if url_map.intern(row.url) != int(row.url_id) or int(row.url_id) != expected:
            raise DataError(f"{path}: url ids must be dense and start at 1 (row {expected})")
    return url_map


def write_clean_stats(stats: CleanStats, path: PathLike) -> None:
    _ensure_parent(path).write_text(json.dumps(asdict(stats), indent=2) + "\n", encoding="utf-8")


def read_clean_stats(path: PathLike) -> CleanStats:
    return CleanStats(**json.loads(pathlib.Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Users and sessions
# ---------------------------------------------------------------------------

def write_users(users: Sequence[UserActivity], path: PathLike) -> None:
    """User-identification layout: the user label on the first row of each block."""
    rows = []
    for n, user in enumerate(users, 1):
        for k, rec in enumerate(user.requests):
            rows.append(
                (
                    f"U{n}" if k == 0 else "",
                    format_log_time(rec.timestamp),
                    rec.elapsed_ms,
                    rec.bytes,
                    rec.url_id,
                )
            )
    df = pd.DataFrame(rows, columns=["User", "Time", "Elapsed Time", "Bytes", "URL"])
    df.to_csv(_ensure_parent(path), sep="\t", index=False)


def write_sessions(sessions: Sequence[Session], path: PathLike) -> None:
    df = pd.DataFrame(
        [
            (
                format_user_key(s.user_key),
                s.ordinal,
                format_epoch(s.first_ts),
                format_epoch(s.last_ts),
                " ".join(str(u) for u in s.raw_requests),
            )
            for s in sessions
        ],
        columns=SESSION_COLUMNS,
    )
    df.to_csv(_ensure_parent(path), sep="\t", index=False)


def read_sessions(path: PathLike) -> list[Session]:
    df = pd.read_csv(path, **_TEXT)
    return [
        dedup_session(
            Session(
                user_key=parse_user_key(row.user_key),
                ordinal=int(row.ordinal),
                first_ts=float(row.first_ts),
                last_ts=float(row.last_ts),
                raw_requests=tuple(int(u) for u in row.raw.split()),
            )
        )
        for row in df.itertuples(index=False)
    ]


def write_sessions_compact(sessions: Iterable[Session], path: PathLike) -> None:
    """One line per session: ``user_key<TAB>ordinal<TAB>url_id:freq,...``."""
    lines = [
        "\t".join(
            [
                format_user_key(s.user_key),
                str(s.ordinal),
                ",".join(f"{u}:{f}" for u, f in s.url_freqs.items()),
            ]
        )
        for s in sessions
    ]
    _ensure_parent(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_session_blocks(
    users: Sequence[UserActivity], sessions: Sequence[Session], path: PathLike
) -> None:
    """Session-identification layout: one block of request rows per session."""
    by_user: dict[tuple[str, str], list[Session]] = {}
    for s in sessions:
        by_user.setdefault(s.user_key, []).append(s)

    rows = []
    for n, user in enumerate(users, 1):
        requests = iter(user.requests)
        for s in by_user.get(user.user_key, []):
            for k in range(len(s.raw_requests)):
                rec = next(requests)
                rows.append(
                    (
                        f"U{n}-S{s.ordinal}" if k == 0 else "",
                        format_log_time(rec.timestamp),
                        rec.elapsed_ms,
                        rec.bytes,
                        rec.url_id,
                    )
                )
    df = pd.DataFrame(rows, columns=["User Session", "Time", "Elapsed Time", "Bytes", "URL"])
    df.to_csv(_ensure_parent(path), sep="\t", index=False)


# ---------------------------------------------------------------------------
# Feature matrix
# ---------------------------------------------------------------------------

def write_matrix(matrix: SessionMatrix, path: PathLike) -> None:
    """Header ``m n scheme``, then ``weight<TAB>col:val,...`` per session (0-based columns)."""
    rows = matrix.rows
    lines = [f"{matrix.m} {matrix.n} {matrix.scheme.value}"]
    for i in range(matrix.m):
        start, end = rows.indptr[i], rows.indptr[i + 1]
        cells = ",".join(
            f"{int(j)}:{float(v)!r}" for j, v in zip(rows.indices[start:end], rows.data[start:end])
        )
        lines.append(f"{float(matrix.weights[i])!r}\t{cells}")
    _ensure_parent(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_catalog(
    matrix: SessionMatrix, url_map: Optional[UrlMap], path: PathLike
) -> None:
    df = pd.DataFrame(
        [
            (j, url_id, url_map.url_of(url_id) if url_map is not None else "")
            for j, url_id in enumerate(matrix.column_catalog)
        ],
        columns=["column", "url_id", "url"],
    )
    df.to_csv(_ensure_parent(path), sep="\t", index=False)


def write_row_labels(matrix: SessionMatrix, path: PathLike) -> None:
    df = pd.DataFrame(list(enumerate(matrix.labels)), columns=["row", "session"])
    df.to_csv(_ensure_parent(path), sep="\t", index=False)


def read_matrix(
    path: PathLike,
    catalog_path: Optional[PathLike] = None,
    labels_path: Optional[PathLike] = None,
) -> SessionMatrix:
    lines = pathlib.Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"{path}: empty matrix file")
    try:
        m_text, n_text, scheme_text = lines[0].split()
        m, n, scheme = int(m_text), int(n_text), Scheme(scheme_text)
    except ValueError:
        raise DataError(f"{path}: malformed header {lines[0]!r}") from None
    if len(lines) - 1 != m:
        raise DataError(f"{path}: header says {m} rows, found {len(lines) - 1}")

    weights = np.empty(m)
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    for i, line in enumerate(lines[1:]):
        weight, _, cells = line.partition("\t")
        weights[i] = float(weight)
        for cell in filter(None, cells.split(",")):
            j, value = cell.split(":")
            indices.append(int(j))
            data.append(float(value))
        indptr.append(len(indices))
    rows = sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(m, n),
    )

    catalog: tuple[int, ...] = tuple(range(1, n + 1))
    if catalog_path is not None:
        df = pd.read_csv(catalog_path, **_TEXT)
        catalog = tuple(int(u) for u in df["url_id"])
    labels: tuple[str, ...] = ()
    if labels_path is not None:
        labels = tuple(pd.read_csv(labels_path, **_TEXT)["session"])
    return SessionMatrix(rows=rows, column_catalog=catalog, weights=weights, scheme=scheme, labels=labels)


def read_catalog_urls(path: PathLike) -> dict[int, str]:
    df = pd.read_csv(path, **_TEXT)
    return {int(row.url_id): row.url for row in df.itertuples(index=False)}


# ---------------------------------------------------------------------------
# Models and profiles
# ---------------------------------------------------------------------------

def write_model(model: FcmModel, path: PathLike) -> None:
    text = json.dumps(model.to_dict(), indent=1, sort_keys=True)
    _ensure_parent(path).write_text(text + "\n", encoding="utf-8")


def read_model(path: PathLike) -> FcmModel:
    return FcmModel.from_dict(json.loads(pathlib.Path(path).read_text(encoding="utf-8")))


def write_validity(df: pd.DataFrame, path: PathLike) -> None:
    df.to_csv(_ensure_parent(path), index=False)


def read_validity(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def write_profiles(
    profiles: Sequence[Profile],
    path: PathLike,
    urls: Optional[dict[int, str]] = None,
    labels: Sequence[str] = (),
) -> None:
    urls = urls or {}
    out = []
    for p in profiles:
        out.append(f"== profile {p.cluster + 1} ({len(p.members)} sessions)")
        for url_id, score in zip(p.top_urls, p.top_scores):
            out.append(f"  {score:8.4f}  [{url_id}] {urls.get(url_id, '')}".rstrip())
        members = ", ".join(
            f"{labels[row] if row < len(labels) else row}:{u:.3f}" for row, u in p.members
        )
        out.append(f"  members: {members}" if members else "  members: -")
        out.append("")
    _ensure_parent(path).write_text("\n".join(out), encoding="utf-8")
