"""Tests for the stage orchestration in usage_profiles.pipeline."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from usage_profiles.config import PipelineConfig
from usage_profiles.exceptions import ConfigError, DataError, StageError
from usage_profiles.log_ingest import clean_log, read_log
from usage_profiles.pipeline import (
    FAILURE_MARKER,
    build_features,
    clamped_sweep,
    compare_heuristics,
    compare_weighting,
    run_pipeline,
)
from usage_profiles.report import REPORT_FILES
from usage_profiles.sessionizer import Heuristic, identify_users, sessionize_all

REPRODUCIBLE = [
    "clean/cleaned.tsv",
    "clean/url_map.tsv",
    "sessions/sessions.tsv",
    "features/matrix.txt",
    "cluster/model.json",
    "cluster/validity.csv",
    "cluster/profiles.txt",
    "report/run_report.json",
    *(f"report/{name}" for name in REPORT_FILES),
]


@pytest.fixture
def fixture_sessions(sample_log):
    cleaned, _, _ = clean_log(read_log(sample_log))
    return sessionize_all(identify_users(cleaned), Heuristic.TOH1, 1800)


class TestBuildFeatures:
    def test_fixture_matrix(self, fixture_sessions):
        features = build_features(fixture_sessions, PipelineConfig())
        matrix = features.matrix
        assert matrix.column_catalog == (1, 2, 3, 5)
        np.testing.assert_allclose(matrix.weights, [0.4, 0.2, 0.2, 0.0])
        np.testing.assert_array_equal(matrix.row_sizes, [3, 2, 2, 1])
        assert features.url_access == {1: 3, 2: 2, 3: 2, 4: 1, 5: 2}
        assert 4 not in features.url_session_support

    def test_artifacts(self, fixture_sessions, tmp_path):
        build_features(fixture_sessions, PipelineConfig(), tmp_path)
        for name in ("matrix.txt", "catalog.tsv", "rows.tsv"):
            assert (tmp_path / "features" / name).exists()


class TestCompareWeighting:
    def test_shared_grid(self, fixture_sessions, caplog):
        matrix = build_features(fixture_sessions, PipelineConfig()).matrix
        with caplog.at_level(logging.WARNING, logger="usage_profiles.pipeline"):
            reports = compare_weighting(matrix, PipelineConfig(c_max=10))
        assert set(reports) == {"weighted", "unweighted"}
        assert reports["weighted"].c_values == reports["unweighted"].c_values == [2]
        assert "sweeping c up to 2" in caplog.text

    def test_hard_series(self, fixture_sessions):
        matrix = build_features(fixture_sessions, PipelineConfig()).matrix
        reports = compare_weighting(matrix, PipelineConfig(hard_min_urls=2))
        assert list(reports) == ["weighted", "unweighted", "hard"]
        assert reports["hard"].best_model.U.shape[0] == 3

    def test_too_few_sessions(self, fixture_sessions):
        matrix = build_features(fixture_sessions, PipelineConfig()).matrix
        with pytest.raises(DataError, match="fewer sessions than clusters"):
            compare_weighting(matrix, PipelineConfig(c_min=3))

    def test_clamped_sweep(self, make_matrix):
        X = np.array([[0.0], [0.2], [5.0], [5.1], [9.0]])
        report = clamped_sweep(make_matrix(X), PipelineConfig(c_max=20, restarts=1), seed=3)
        assert report.c_values[-1] <= 4


class TestCompareHeuristics:
    def test_total_row(self, sample_log):
        cleaned, _, _ = clean_log(read_log(sample_log))
        frame = compare_heuristics(cleaned, 1800)
        assert list(frame.columns) == ["user", "toh1_sessions", "toh2_sessions"]
        assert list(frame["user"]) == ["IP1/UA1", "IP2/UA2", "ALL"]
        assert frame.iloc[-1]["toh1_sessions"] == frame.iloc[:-1]["toh1_sessions"].sum() == 4

    def test_page_stay_keeps_steady_browsing_together(self, make_records):
        # Short steps but long total: TOH1 splits, TOH2 does not.
        cleaned = make_records([(k * 600, k % 3 + 1) for k in range(6)])
        frame = compare_heuristics(cleaned, 1800)
        assert frame.iloc[0]["toh1_sessions"] == 2
        assert frame.iloc[0]["toh2_sessions"] == 1


class TestRunPipeline:
    def _cfg(self, sample_log, out, **kwargs):
        return PipelineConfig(input=str(sample_log), output_dir=str(out), **kwargs)

    def test_artifacts(self, sample_log, tmp_path):
        report = run_pipeline(self._cfg(sample_log, tmp_path))
        for name in REPRODUCIBLE + ["report/timings.csv", "config.effective", "sessions/users.tsv"]:
            assert (tmp_path / name).exists(), name
        assert not (tmp_path / FAILURE_MARKER).exists()
        assert report.clean_stats.kept == 10
        assert report.user_count == 2
        assert report.series["weighted"].chosen_c == 2
        assert set(report.session_stats) == {"toh1", "toh2"}
        assert report.matrix_shape == (4, 4)

    def test_deterministic(self, sample_log, tmp_path):
        run_pipeline(self._cfg(sample_log, tmp_path / "a", seed=7))
        run_pipeline(self._cfg(sample_log, tmp_path / "b", seed=7))
        for name in REPRODUCIBLE:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_config_checked_before_any_stage(self, sample_log, tmp_path):
        out = tmp_path / "run"
        with pytest.raises(ConfigError):
            run_pipeline(self._cfg(sample_log, out, lb=4, ub=4))
        assert not out.exists()

    def test_missing_input_marks_failure(self, tmp_path):
        cfg = PipelineConfig(input=str(tmp_path / "absent.log"), output_dir=str(tmp_path / "run"))
        with pytest.raises(StageError) as exc_info:
            run_pipeline(cfg)
        assert exc_info.value.stage == "clean"
        assert isinstance(exc_info.value.cause, FileNotFoundError)
        marker = (tmp_path / "run" / FAILURE_MARKER).read_text(encoding="utf-8")
        assert marker.startswith("stage=clean\n")

    def test_empty_feature_space(self, sample_log, tmp_path):
        lines = read_log(sample_log)
        log = tmp_path / "distinct.log"
        # Keep one request per page so no URL reaches the access threshold.
        log.write_text("\n".join([lines[0], lines[8], lines[13]]) + "\n", encoding="utf-8")
        with pytest.raises(StageError) as exc_info:
            run_pipeline(PipelineConfig(input=str(log), output_dir=str(tmp_path / "run")))
        assert exc_info.value.stage == "features"
        assert "empty feature space" in str(exc_info.value)
        assert (tmp_path / "run" / "clean" / "cleaned.tsv").exists()
        assert (tmp_path / "run" / FAILURE_MARKER).exists()

    def test_stale_marker_removed(self, sample_log, tmp_path):
        (tmp_path / FAILURE_MARKER).write_text("stage=clean\n", encoding="utf-8")
        run_pipeline(self._cfg(sample_log, tmp_path))
        assert not (tmp_path / FAILURE_MARKER).exists()

    def test_hard_series_reported(self, sample_log, tmp_path):
        report = run_pipeline(self._cfg(sample_log, tmp_path, hard_min_urls=2))
        assert "hard" in report.series
        header = (tmp_path / "report" / "validity_vs_c.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == "c,S_weighted,S_unweighted,S_hard"
