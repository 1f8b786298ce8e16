"""Unit tests for the Xie-Beni index and the cluster-count sweep."""

from __future__ import annotations

import numpy as np
import pytest

from usage_profiles.exceptions import ConfigError, DataError
from usage_profiles.fcm import FcmConfig, run_fcm
from usage_profiles.synthetic import planted_blobs
from usage_profiles.validity import sweep_clusters, xie_beni

TWO_BLOBS = np.array([[0.0], [0.1], [10.0], [10.1]])
CRISP = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])


class TestXieBeni:
    def test_points_at_centers(self):
        X = np.array([[0.0], [10.0]])
        assert xie_beni(X, np.eye(2), X.copy()) == 0.0

    def test_two_blobs_direct_evaluation(self):
        V = np.array([[0.05], [10.05]])
        assert xie_beni(TWO_BLOBS, CRISP, V) == pytest.approx(2.5e-5, rel=1e-9)

    def test_over_segmentation_scores_worse(self, make_matrix):
        two = xie_beni(TWO_BLOBS, CRISP, np.array([[0.05], [10.05]]))
        model = run_fcm(make_matrix(TWO_BLOBS), FcmConfig(c=3, seed=0))
        three = xie_beni(TWO_BLOBS, model.U, model.V)
        assert three > two

    def test_exponent_is_two_regardless_of_fuzzifier(self):
        U = np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.1, 0.9]])
        V = np.array([[0.05], [10.05]])
        d2 = (TWO_BLOBS - V.T) ** 2
        expected = (U**2 * d2).sum() / (4 * 100.0)
        assert xie_beni(TWO_BLOBS, U, V) == pytest.approx(expected, rel=1e-12)

    def test_weighted_variant(self):
        U = np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.1, 0.9]])
        V = np.array([[0.05], [10.05]])
        plain = xie_beni(TWO_BLOBS, U, V)
        assert xie_beni(TWO_BLOBS, U, V, np.ones(4)) == pytest.approx(plain)
        assert xie_beni(TWO_BLOBS, U, V, np.full(4, 0.5)) == pytest.approx(plain / 2)

    def test_zero_separation(self):
        with pytest.raises(DataError, match="zero separation"):
            xie_beni(TWO_BLOBS, CRISP, np.array([[5.0], [5.0]]))


class TestSweepClusters:
    def test_recovers_four_blobs(self, make_matrix):
        X, _ = planted_blobs(seed=0)
        report = sweep_clusters(make_matrix(X), c_min=2, c_max=8, restarts=5, seed=0)
        assert report.chosen_c == 4
        assert report.c_values == list(range(2, 9))
        assert report.best_model.c == 4

    def test_single_c(self, make_matrix):
        X, _ = planted_blobs(seed=2)
        report = sweep_clusters(make_matrix(X), c_min=3, c_max=3, restarts=2, seed=1)
        assert report.chosen_c == 3
        assert len(report) == 1

    def test_deterministic(self, make_matrix):
        X, _ = planted_blobs(seed=5)
        a = sweep_clusters(make_matrix(X), c_min=2, c_max=5, restarts=3, seed=9)
        b = sweep_clusters(make_matrix(X), c_min=2, c_max=5, restarts=3, seed=9)
        assert a.rows == b.rows
        assert a.chosen_c == b.chosen_c

    def test_dataframe(self, make_matrix):
        X, _ = planted_blobs(seed=6)
        df = sweep_clusters(make_matrix(X), c_min=2, c_max=4, restarts=1, seed=0).to_dataframe()
        assert list(df.columns) == ["c", "J", "S"]
        assert list(df["c"]) == [2, 3, 4]

    def test_tie_prefers_smaller_c(self, make_matrix, monkeypatch):
        monkeypatch.setattr("usage_profiles.validity.xie_beni", lambda *args, **kwargs: 1.0)
        X, _ = planted_blobs(seed=0)
        report = sweep_clusters(make_matrix(X), c_min=3, c_max=6, restarts=1, seed=0)
        assert report.chosen_c == 3

    def test_zero_separation_c_skipped(self, make_matrix):
        # Only two distinct rows: every c > 2 has coincident centres.
        X = np.array([[0.0]] * 5 + [[1.0]] * 5)
        report = sweep_clusters(make_matrix(X), c_min=2, c_max=4, restarts=2, seed=0)
        assert report.chosen_c == 2
        assert set(report.skipped) == {3, 4}
        assert report.c_values == [2]

    @pytest.mark.parametrize(
        "kwargs",
        [{"c_min": 1, "c_max": 4}, {"c_min": 5, "c_max": 4}, {"c_min": 2, "c_max": 4, "restarts": 0}],
    )
    def test_invalid_range(self, make_matrix, kwargs):
        X, _ = planted_blobs(seed=0)
        with pytest.raises(ConfigError):
            sweep_clusters(make_matrix(X), **kwargs)

    def test_too_few_sessions(self, make_matrix):
        with pytest.raises(DataError, match="fewer sessions than clusters"):
            sweep_clusters(make_matrix(np.arange(5.0)[:, None]), c_min=2, c_max=5)
