"""End-to-end orchestration: clean -> sessionize -> features -> cluster -> report."""

from __future__ import annotations

import contextlib
import logging
import pathlib
import time
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
import pandas as pd

from . import storage
from .config import PipelineConfig
from .exceptions import DataError, StageError
from .features import (
    SessionMatrix,
    apply_weights,
    compute_support,
    filter_low_access,
    filter_low_support,
    vectorize,
)
from .fcm import derive_seed, extract_profiles, included_view
from .log_ingest import CleanedRecord, CleanStats, UrlMap, clean_log, read_log
from .report import RunReport, SeriesResult, emit_report, write_run_report, write_timings
from .sessionizer import (
    Heuristic,
    Session,
    UserActivity,
    format_user_key,
    identify_users,
    session_stats,
    sessionize,
    sessionize_all,
)
from .validity import ValidityReport, sweep_clusters

logger = logging.getLogger(__name__)

FAILURE_MARKER = "FAILED"

# Spawn keys of the per-stage seeds derived from the root seed.
CLUSTER_STAGE = 4


@dataclass
class FeatureResult:
    sessions: list[Session]
    matrix: SessionMatrix
    url_access: dict[int, int]
    url_session_support: dict[int, int]


@contextlib.contextmanager
def _stage(name: str, out_dir: pathlib.Path, timings: dict[str, float]) -> Iterator[None]:
    start = time.perf_counter()
    logger.info("stage %s: start", name)
    try:
        yield
    except Exception as exc:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / FAILURE_MARKER).write_text(
            f"stage={name}\ncause={type(exc).__name__}: {exc}\n", encoding="utf-8"
        )
        logger.error("stage %s failed: %s", name, exc)
        raise StageError(name, exc) from exc
    timings[name] = time.perf_counter() - start
    logger.info("stage %s: done in %.3fs", name, timings[name])


# ---------------------------------------------------------------------------
# Stage building blocks (also used by the single-stage CLI commands)
# ---------------------------------------------------------------------------

def run_clean(cfg: PipelineConfig, out_dir: pathlib.Path) -> tuple[list[CleanedRecord], UrlMap, CleanStats]:
    if not cfg.input:
        raise DataError("no input log configured")
    cleaned, url_map, stats = clean_log(read_log(cfg.input), cfg.clean_policy())
    storage.write_cleaned(cleaned, out_dir / "clean" / "cleaned.tsv")
    storage.write_url_map(url_map, out_dir / "clean" / "url_map.tsv")
    storage.write_clean_stats(stats, out_dir / "clean" / "clean_stats.json")
    return cleaned, url_map, stats


def run_sessionize(
    cleaned: Sequence[CleanedRecord],
    heuristic: Heuristic,
    beta_seconds: float,
    out_dir: pathlib.Path,
) -> tuple[list[UserActivity], list[Session]]:
    users = identify_users(cleaned)
    logger.info("identified %d users", len(users))
    sessions = sessionize_all(users, heuristic, beta_seconds)
    target = out_dir / "sessions"
    storage.write_users(users, target / "users.tsv")
    storage.write_sessions(sessions, target / "sessions.tsv")
    storage.write_sessions_compact(sessions, target / "sessions.compact")
    storage.write_session_blocks(users, sessions, target / "sessions_blocks.tsv")
    return users, sessions


def build_features(
    sessions: Sequence[Session],
    cfg: PipelineConfig,
    out_dir: Optional[pathlib.Path] = None,
    url_map: Optional[UrlMap] = None,
) -> FeatureResult:
    """Access filter, session-support filter, weights and vectors."""
    url_access = compute_support(sessions).access_count
    after_access, _ = filter_low_access(sessions, cfg.min_access)
    url_session_support = compute_support(after_access).session_support
    filtered, retained = filter_low_support(after_access, cfg.min_session_support)
    weighted = apply_weights(filtered, cfg.weight_config())
    matrix = vectorize(weighted, cfg.scheme, catalog=sorted(retained))
    logger.info(
        "feature matrix %d x %d (%s), %d zero-weight sessions",
        matrix.m, matrix.n, matrix.scheme.value, matrix.zero_weight_rows.size,
    )
    if out_dir is not None:
        target = out_dir / "features"
        storage.write_matrix(matrix, target / "matrix.txt")
        storage.write_catalog(matrix, url_map, target / "catalog.tsv")
        storage.write_row_labels(matrix, target / "rows.tsv")
    return FeatureResult(weighted, matrix, url_access, url_session_support)


def _included_count(matrix: SessionMatrix, cfg: PipelineConfig) -> int:
    X, _, _, _ = included_view(matrix, cfg.zero_weight)
    return X.shape[0]


def _clamp_c_max(cfg: PipelineConfig, included: int) -> int:
    c_max = min(cfg.c_max, included - 1)
    if c_max < cfg.c_min:
        raise DataError(f"fewer sessions than clusters: {included} included sessions, c_min={cfg.c_min}")
    if c_max < cfg.c_max:
        logger.warning("only %d sessions to cluster; sweeping c up to %d instead of %d", included, c_max, cfg.c_max)
    return c_max


def clamped_sweep(
    matrix: SessionMatrix, cfg: PipelineConfig, seed: int, c_max: Optional[int] = None
) -> ValidityReport:
    """Sweep ``c_min..c_max``, lowering ``c_max`` to one below the included session count."""
    if c_max is None:
        c_max = _clamp_c_max(cfg, _included_count(matrix, cfg))
    return sweep_clusters(
        matrix,
        q=cfg.q,
        c_min=cfg.c_min,
        c_max=c_max,
        restarts=cfg.restarts,
        seed=seed,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
        zero_weight_policy=cfg.zero_weight,
        validity_weighted=cfg.validity_weighted,
    )


def compare_weighting(
    matrix: SessionMatrix, cfg: PipelineConfig, seed: Optional[int] = None
) -> dict[str, ValidityReport]:
    """
    Sweep the same matrix with fuzzy weights and with all weights set to one;
    with ``hard_min_urls`` set, also sweep the crisp baseline where sessions
    below that size are removed and the rest weigh one. Every series uses the
    same seed and the same grid of c.
    """
    seed = derive_seed(cfg.seed, CLUSTER_STAGE) if seed is None else seed
    series = {
        "weighted": matrix,
        "unweighted": matrix.with_weights(np.ones(matrix.m)),
    }
    if cfg.hard_min_urls > 0:
        hard = matrix.take_rows(np.flatnonzero(matrix.row_sizes >= cfg.hard_min_urls))
        series["hard"] = hard.with_weights(np.ones(hard.m))
    c_max = _clamp_c_max(cfg, min(_included_count(m, cfg) for m in series.values()))
    return {name: clamped_sweep(m, cfg, seed, c_max) for name, m in series.items()}


def compare_heuristics(cleaned: Sequence[CleanedRecord], beta_seconds: float) -> pd.DataFrame:
    """Per-user session counts under TOH1 and TOH2, with an ``ALL`` total row."""
    rows = []
    for user in identify_users(cleaned):
        rows.append(
            (
                format_user_key(user.user_key),
                len(sessionize(user, Heuristic.TOH1, beta_seconds)),
                len(sessionize(user, Heuristic.TOH2, beta_seconds)),
            )
        )
    frame = pd.DataFrame(rows, columns=["user", "toh1_sessions", "toh2_sessions"])
    total = pd.DataFrame(
        [("ALL", int(frame["toh1_sessions"].sum()), int(frame["toh2_sessions"].sum()))],
        columns=frame.columns,
    )
    return pd.concat([frame, total], ignore_index=True)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

def run_pipeline(cfg: PipelineConfig) -> RunReport:
    """
    Run every stage in order, persisting intermediate artifacts under
    ``cfg.output_dir``. A failing stage raises :class:`StageError` and leaves
    a ``FAILED`` marker next to whatever was already written.
    """
    cfg.validate()
    out_dir = pathlib.Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / FAILURE_MARKER).unlink(missing_ok=True)
    (out_dir / "config.effective").write_text("\n".join(cfg.to_lines()) + "\n", encoding="utf-8")
    timings: dict[str, float] = {}

    with _stage("clean", out_dir, timings):
        cleaned, url_map, stats = run_clean(cfg, out_dir)

    with _stage("sessionize", out_dir, timings):
        users, sessions = run_sessionize(cleaned, cfg.heuristic, cfg.beta_seconds, out_dir)
        other = Heuristic.TOH2 if cfg.heuristic is Heuristic.TOH1 else Heuristic.TOH1
        per_heuristic = {
            cfg.heuristic.value: session_stats(sessions),
            other.value: session_stats(sessionize_all(users, other, cfg.beta_seconds)),
        }

    with _stage("features", out_dir, timings):
        features = build_features(sessions, cfg, out_dir, url_map)

    with _stage("cluster", out_dir, timings):
        reports = compare_weighting(features.matrix, cfg)
        weighted = reports["weighted"]
        model = weighted.best_model
        profiles = extract_profiles(
            model, features.matrix, top_k=cfg.top_k, membership_threshold=cfg.membership_threshold
        )
        target = out_dir / "cluster"
        storage.write_model(model, target / "model.json")
        storage.write_validity(weighted.to_dataframe(), target / "validity.csv")
        storage.write_profiles(
            profiles,
            target / "profiles.txt",
            urls={u: url_map.url_of(u) for u in features.matrix.column_catalog},
            labels=features.matrix.labels,
        )

    with _stage("report", out_dir, timings):
        report = RunReport(
            clean_stats=stats,
            user_count=len(users),
            session_stats=per_heuristic,
            url_access=features.url_access,
            url_session_support=features.url_session_support,
            session_sizes=[s.unique_count for s in sessions],
            weights=features.matrix.weights.tolist(),
            matrix_shape=(features.matrix.m, features.matrix.n),
            retained_urls=features.matrix.n,
            series={
                name: SeriesResult(
                    rows=[(r.c, r.J, r.S) for r in rep.rows],
                    chosen_c=rep.chosen_c,
                    skipped=dict(rep.skipped),
                )
                for name, rep in reports.items()
            },
            model_summary={
                "c": model.c,
                "iterations": model.iterations,
                "converged": model.converged,
                "J": model.objective,
                "excluded": len(model.excluded_rows),
                "profiles": [list(p.top_urls) for p in profiles],
            },
            timings=timings,
        )
        emit_report(report, out_dir / "report")
        write_run_report(report, out_dir / "report" / "run_report.json")

    write_timings(timings, out_dir / "report" / "timings.csv")
    logger.info("%r", report)
    return report
