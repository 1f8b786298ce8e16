"""Xie-Beni validity and the cluster-count sweep."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist, pdist

from .exceptions import ConfigError, DataError
from .features import SessionMatrix
from .fcm import FcmConfig, FcmModel, ZeroWeightPolicy, derive_seed, included_view, run_fcm

logger = logging.getLogger(__name__)


def xie_beni(
    X: np.ndarray,
    U: np.ndarray,
    V: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> float:
    """
    Compactness over separation:
    ``sum_ij u_ij^2 ||x_i - v_j||^2 / (m * min_{l != k} ||v_l - v_k||^2)``.

    The exponent is 2 whatever the fuzziness used for clustering. ``weights``
    scales each row's compactness term (off by default).
    """
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if V.shape[0] < 2:
        raise DataError("xie-beni needs at least two centres")
    separation = float(pdist(V, "sqeuclidean").min())
    if separation <= 0.0:
        raise DataError("zero separation")
    compact = np.asarray(U, dtype=float) ** 2 * cdist(X, V, "sqeuclidean")
    if weights is not None:
        compact = compact * np.asarray(weights, dtype=float)[:, None]
    return float(compact.sum() / (X.shape[0] * separation))


@dataclass(frozen=True)
class ValidityRow:
    c: int
    J: float
    S: float
    iterations: int
    converged: bool
    restart: int


@dataclass
class ValidityReport:
    """Per-c best objective and Xie-Beni value, plus the chosen cluster count."""

    rows: list[ValidityRow]
    chosen_c: int
    skipped: dict[int, str] = field(default_factory=dict)
    models: dict[int, FcmModel] = field(default_factory=dict, repr=False)

    @property
    def c_values(self) -> list[int]:
        return [r.c for r in self.rows]

    @property
    def best_model(self) -> Optional[FcmModel]:
        return self.models.get(self.chosen_c)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.c, r.J, r.S) for r in self.rows], columns=["c", "J", "S"]
        )

    def __len__(self) -> int:
        return len(self.rows)


def sweep_clusters(
    matrix: SessionMatrix,
    q: float = 2.0,
    c_min: int = 2,
    c_max: int = 60,
    restarts: int = 5,
    seed: int = 0,
    tol: float = 1e-5,
    max_iter: int = 300,
    zero_weight_policy: ZeroWeightPolicy | str = ZeroWeightPolicy.EXCLUDE,
    validity_weighted: bool = False,
) -> ValidityReport:
    """
    Run ``restarts`` seeded FCM fits for each c in ``[c_min, c_max]``, keep the
    lowest-objective fit, score it with Xie-Beni and choose the minimising c
    (smallest c on ties). Run seeds derive from ``(seed, c, restart)``.
    """
    if c_min < 2:
        raise ConfigError(f"c_min must be >= 2, got {c_min}")
    if c_max < c_min:
        raise ConfigError(f"c_max ({c_max}) must be >= c_min ({c_min})")
    if restarts < 1:
        raise ConfigError(f"restarts must be >= 1, got {restarts}")

    X, w, _, _ = included_view(matrix, zero_weight_policy)
    if X.shape[0] <= c_max:
        raise DataError(
            f"fewer sessions than clusters: {X.shape[0]} included sessions, c_max={c_max}"
        )

    rows: list[ValidityRow] = []
    skipped: dict[int, str] = {}
    models: dict[int, FcmModel] = {}

    for c in range(c_min, c_max + 1):
        best: Optional[FcmModel] = None
        best_restart = -1
        failure = ""
        for restart in range(restarts):
            cfg = FcmConfig(
                c=c,
                q=q,
                tol=tol,
                max_iter=max_iter,
                seed=derive_seed(seed, c, restart),
                zero_weight_policy=zero_weight_policy,
            )
            try:
                model = run_fcm(matrix, cfg)
            except DataError as exc:
                failure = str(exc)
                continue
            if best is None or model.objective < best.objective:
                best, best_restart = model, restart

        if best is None:
            logger.warning("c=%d skipped: every run failed (%s)", c, failure)
            skipped[c] = failure
            continue
        try:
            S = xie_beni(X, best.U, best.V, w if validity_weighted else None)
        except DataError as exc:
            logger.warning("c=%d skipped: %s", c, exc)
            skipped[c] = str(exc)
            continue

        rows.append(
            ValidityRow(
                c=c,
                J=best.objective,
                S=S,
                iterations=best.iterations,
                converged=best.converged,
                restart=best_restart,
            )
        )
        models[c] = best
        logger.info("c=%d J=%.6g S=%.6g", c, best.objective, S)

    if not rows:
        raise DataError(f"no valid cluster count in [{c_min}, {c_max}]")
    chosen = min(rows, key=lambda r: (r.S, r.c)).c
    logger.info("chosen c=%d", chosen)
    return ValidityReport(rows=rows, chosen_c=chosen, skipped=skipped, models=models)
