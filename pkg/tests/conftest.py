"""Shared fixtures."""

from __future__ import annotations

import pathlib

import numpy as np
import pytest
import scipy.sparse as sp

from usage_profiles.features import Scheme, SessionMatrix
from usage_profiles.log_ingest import CleanedRecord

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture
def sample_log() -> pathlib.Path:
    """20 lines: 10 kept, 6 static files, 3 robot requests, 1 truncated line."""
    return FIXTURES / "sample_access.log"


@pytest.fixture
def make_matrix():
    """Wrap a dense array (and optional weights) as a SessionMatrix."""

    def _make(X, weights=None, scheme=Scheme.FREQUENCY) -> SessionMatrix:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
        return SessionMatrix(
            rows=sp.csr_matrix(X),
            column_catalog=tuple(range(1, X.shape[1] + 1)),
            weights=w,
            scheme=scheme,
        )

    return _make


@pytest.fixture
def make_records():
    """CleanedRecords for one user from (offset_seconds, url_id) pairs."""

    def _make(events, ip="IP1", ua="UA1", start=1_000_000.0) -> list[CleanedRecord]:
        return [
            CleanedRecord(
                timestamp=start + offset,
                ip_alias=ip,
                ua_alias=ua,
                elapsed_ms=100,
                bytes=1000,
                url_id=url_id,
            )
            for offset, url_id in events
        ]

    return _make
