"""Tests for the synthetic log and planted-group generators."""

from __future__ import annotations

import numpy as np

from usage_profiles.features import WeightConfig, apply_weights
from usage_profiles.log_ingest import clean_log
from usage_profiles.sessionizer import Heuristic, identify_users, sessionize_all
from usage_profiles.synthetic import CorpusSpec, generate_log, planted_blobs, planted_sessions

SMALL = CorpusSpec(groups=2, sessions_per_group=10, noise_sessions=5)


class TestGenerateLog:
    def test_deterministic(self):
        assert generate_log(3, SMALL) == generate_log(3, SMALL)
        assert generate_log(3, SMALL) != generate_log(4, SMALL)

    def test_cleaning_counts(self):
        cleaned, _, stats = clean_log(generate_log(1, SMALL))
        assert stats.consistent
        assert stats.parse_errors == SMALL.malformed_lines
        # Robot agents fetch one group's pages; the robots.txt crawler makes four requests.
        assert stats.dropped_robot == SMALL.robot_sessions * SMALL.urls_per_group + 4
        assert stats.dropped_suffix > 0
        assert len(identify_users(cleaned)) == 25

    def test_one_session_per_visit(self):
        cleaned, _, _ = clean_log(generate_log(2, SMALL))
        users = identify_users(cleaned)
        for heuristic in Heuristic:
            assert len(sessionize_all(users, heuristic, 1800)) == len(users)


class TestPlantedSessions:
    def test_labels_and_sizes(self):
        sessions, labels = planted_sessions(seed=0, spec=SMALL)
        assert len(sessions) == len(labels) == 25
        assert list(np.unique(labels)) == [-1, 0, 1]
        for s, label in zip(sessions, labels):
            if label >= 0:
                assert SMALL.min_urls <= s.unique_count <= SMALL.max_urls
                low = label * SMALL.urls_per_group
                assert all(low < u <= low + SMALL.urls_per_group for u in s.url_freqs)
            else:
                assert 1 <= s.unique_count <= 2

    def test_noise_weighs_little(self):
        sessions, labels = planted_sessions(seed=1, spec=SMALL)
        weights = np.array([s.weight for s in apply_weights(sessions, WeightConfig())])
        assert weights[labels == -1].max() <= 0.2
        assert weights[labels >= 0].min() >= 0.8


class TestPlantedBlobs:
    def test_shape_and_radius(self):
        X, labels = planted_blobs(seed=0)
        assert X.shape == (80, 2)
        centres = np.array([[0, 0], [20, 0], [0, 20], [20, 20]])
        assert (np.linalg.norm(X - centres[labels], axis=1) <= 1.0).all()
