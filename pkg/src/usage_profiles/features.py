"""Low-support URL filtering, session vectors and fuzzy session weights."""

from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError, DataError
from .sessionizer import Session

logger = logging.getLogger(__name__)


class Scheme(str, enum.Enum):
    BINARY = "binary"
    FREQUENCY = "frequency"


@dataclass(frozen=True)
class UrlSupport:
    access_count: dict[int, int] = field(default_factory=dict)
    session_support: dict[int, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.access_count)


@dataclass(frozen=True)
class WeightConfig:
    """Bounds of the linear session-weight membership function."""

    lb: int = 1
    ub: int = 6

    def __post_init__(self) -> None:
        if self.lb < 0:
            raise ConfigError(f"lb must be >= 0, got {self.lb}")
        if self.ub <= self.lb:
            raise ConfigError(f"ub must be greater than lb, got lb={self.lb} ub={self.ub}")


@dataclass
class SessionMatrix:
    """
    Session-by-URL feature matrix.

    Attributes
    ----------
    rows : scipy.sparse.csr_matrix
        ``m x n`` non-negative feature values.
    column_catalog : tuple[int, ...]
        url id of every column, ascending.
    weights : numpy.ndarray
        Per-session weight in ``[0, 1]``.
    scheme : Scheme
    labels : tuple[str, ...]
        Session label per row (``IP1/UA1-S1``), empty when unknown.
    """

    rows: sp.csr_matrix
    column_catalog: tuple[int, ...]
    weights: np.ndarray
    scheme: Scheme = Scheme.BINARY
    labels: tuple[str, ...] = ()

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    @property
    def zero_weight_rows(self) -> np.ndarray:
        return np.flatnonzero(self.weights == 0)

    @property
    def row_sizes(self) -> np.ndarray:
        """Non-zero entries per row, i.e. the unique URL count of each session."""
        return np.diff(self.rows.indptr)

    def dense(self) -> np.ndarray:
        return self.rows.toarray()

    def with_weights(self, weights: np.ndarray) -> "SessionMatrix":
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (self.m,):
            raise DataError(f"expected {self.m} weights, got {weights.shape}")
        return replace(self, weights=weights)

    def take_rows(self, index: Sequence[int] | np.ndarray) -> "SessionMatrix":
        index = np.asarray(index, dtype=int)
        labels = tuple(self.labels[i] for i in index) if self.labels else ()
        return replace(
            self,
            rows=self.rows[index],
            weights=self.weights[index].copy(),
            labels=labels,
        )


# ---------------------------------------------------------------------------
# Support filtering
# ---------------------------------------------------------------------------

def compute_support(sessions: Iterable[Session]) -> UrlSupport:
    access: Counter[int] = Counter()
    support: Counter[int] = Counter()
    for s in sessions:
        for url_id, freq in s.url_freqs.items():
            access[url_id] += freq
            support[url_id] += 1
    return UrlSupport(dict(sorted(access.items())), dict(sorted(support.items())))


def _restrict(sessions: Iterable[Session], keep: set[int]) -> list[Session]:
    out = []
    for s in sessions:
        raw = tuple(u for u in s.raw_requests if u in keep)
        freqs = {u: f for u, f in s.url_freqs.items() if u in keep}
        out.append(replace(s, raw_requests=raw, url_freqs=freqs))
    return out


def filter_low_access(
    sessions: Sequence[Session], min_access: int
) -> tuple[list[Session], set[int]]:
    """Drop URLs whose total access count is below ``min_access``."""
    if min_access < 1:
        raise ConfigError(f"min_access must be >= 1, got {min_access}")
    support = compute_support(sessions)
    keep = {u for u, n in support.access_count.items() if n >= min_access}
    logger.info("access filter >= %d: kept %d of %d urls", min_access, len(keep), len(support))
    return _restrict(sessions, keep), keep


def filter_low_support(
    sessions: Sequence[Session], min_session_support: int
) -> tuple[list[Session], set[int]]:
    """Drop URLs contained in fewer than ``min_session_support`` sessions."""
    if min_session_support < 1:
        raise ConfigError(f"min_session_support must be >= 1, got {min_session_support}")
    support = compute_support(sessions)
    keep = {u for u, n in support.session_support.items() if n >= min_session_support}
    logger.info(
        "session-support filter >= %d: kept %d of %d urls",
        min_session_support,
        len(keep),
        len(support),
    )
    return _restrict(sessions, keep), keep


# ---------------------------------------------------------------------------
# Weights and vectors
# ---------------------------------------------------------------------------

def assign_session_weight(s: Session | int, cfg: WeightConfig) -> float:
    """
    Linear fuzzy membership on the unique URL count.

    0 at or below ``lb``, 1 at or above ``ub``, linear in between.
    """
    size = s if isinstance(s, int) else s.unique_count
    if size <= cfg.lb:
        return 0.0
    if size >= cfg.ub:
        return 1.0
    return (size - cfg.lb) / (cfg.ub - cfg.lb)


def apply_weights(sessions: Iterable[Session], cfg: WeightConfig) -> list[Session]:
    return [replace(s, weight=assign_session_weight(s, cfg)) for s in sessions]


def vectorize(
    sessions: Sequence[Session],
    scheme: Scheme | str = Scheme.BINARY,
    catalog: Optional[Sequence[int]] = None,
) -> SessionMatrix:
    """
    Build the sparse session matrix; columns are url ids in ascending order.

    Without an explicit ``catalog`` the columns are the url ids present in
    at least one session.
    """
    scheme = Scheme(scheme)
    if catalog is None:
        catalog = sorted({u for s in sessions for u in s.url_freqs})
    else:
        catalog = sorted(catalog)
    if not catalog:
        raise DataError("empty feature space")

    column = {url_id: j for j, url_id in enumerate(catalog)}
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    for s in sessions:
        cells = sorted((column[u], f) for u, f in s.url_freqs.items() if u in column)
        for j, freq in cells:
            indices.append(j)
            data.append(1.0 if scheme is Scheme.BINARY else float(freq))
        indptr.append(len(indices))

    rows = sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(sessions), len(catalog)),
    )
    return SessionMatrix(
        rows=rows,
        column_catalog=tuple(catalog),
        weights=np.asarray([s.weight for s in sessions], dtype=float),
        scheme=scheme,
        labels=tuple(s.label for s in sessions),
    )
