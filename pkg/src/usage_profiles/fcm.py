"""Weighted fuzzy c-means over session vectors.

The objective is

    J(U, V) = sum_j sum_i u_ij^q * w_i * ||x_i - v_j||^2

minimised by alternating the membership update (from weighted distances)
and the centre update ``v_j = sum_i w_i u_ij^q x_i / sum_i w_i u_ij^q``.
Both updates are exact minimisers of J for the other block held fixed,
so the objective trace never increases.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import ConfigError, DataError
from .features import SessionMatrix

logger = logging.getLogger(__name__)

ZERO_WEIGHT_EPSILON = 1e-6

# Memberships below this are left out of serialised models.
MEMBERSHIP_FLOOR = 1e-4


class ZeroWeightPolicy(str, enum.Enum):
    EXCLUDE = "exclude"
    EPSILON = "epsilon"


@dataclass(frozen=True)
class FcmConfig:
    c: int = 8
    q: float = 2.0
    tol: float = 1e-5
    max_iter: int = 300
    seed: int = 0
    zero_weight_policy: ZeroWeightPolicy = ZeroWeightPolicy.EXCLUDE

    def __post_init__(self) -> None:
        object.__setattr__(self, "zero_weight_policy", ZeroWeightPolicy(self.zero_weight_policy))
        if self.c < 2:
            raise ConfigError(f"c must be >= 2, got {self.c}")
        if not self.q > 1:
            raise ConfigError(f"fuzziness q must be > 1, got {self.q}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "c": self.c,
            "q": self.q,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "seed": self.seed,
            "zero_weight_policy": self.zero_weight_policy.value,
        }


@dataclass
class FcmModel:
    """
    Result of one FCM run.

    ``U`` and ``weights`` are indexed by included row; ``included_rows`` maps
    them back to rows of the input matrix.
    """

    U: np.ndarray
    V: np.ndarray
    J_trace: list[float]
    iterations: int
    converged: bool
    config: FcmConfig
    included_rows: tuple[int, ...]
    excluded_rows: tuple[int, ...] = ()
    weights: np.ndarray = field(default_factory=lambda: np.ones(0))
    reinitialized: list[tuple[int, int]] = field(default_factory=list)

    @property
    def c(self) -> int:
        return self.V.shape[0]

    @property
    def objective(self) -> float:
        return self.J_trace[-1]

    def to_dict(self) -> dict[str, Any]:
        rows, cols = np.nonzero(self.U > MEMBERSHIP_FLOOR)
        return {
            "config": self.config.to_dict(),
            "iterations": self.iterations,
            "converged": self.converged,
            "J_trace": [float(j) for j in self.J_trace],
            "V": self.V.tolist(),
            "U": {
                "shape": list(self.U.shape),
                "entries": [
                    [int(i), int(j), float(self.U[i, j])] for i, j in zip(rows, cols)
                ],
            },
            "weights": self.weights.tolist(),
            "included_rows": list(self.included_rows),
            "excluded_rows": list(self.excluded_rows),
            "reinitialized": [list(e) for e in self.reinitialized],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FcmModel":
        U = np.zeros(tuple(data["U"]["shape"]))
        for i, j, u in data["U"]["entries"]:
            U[i, j] = u
        return cls(
            U=U,
            V=np.asarray(data["V"], dtype=float),
            J_trace=list(data["J_trace"]),
            iterations=data["iterations"],
            converged=data["converged"],
            config=FcmConfig(**data["config"]),
            included_rows=tuple(data["included_rows"]),
            excluded_rows=tuple(data["excluded_rows"]),
            weights=np.asarray(data["weights"], dtype=float),
            reinitialized=[tuple(e) for e in data["reinitialized"]],
        )


def derive_seed(root: int, *keys: int) -> int:
    """Deterministic child seed for (root, keys...)."""
    return int(np.random.SeedSequence([root, *keys]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Single steps
# ---------------------------------------------------------------------------

def weighted_distance_sq(x: Sequence[float], v: Sequence[float], w: float = 1.0) -> float:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != v.shape:
        raise DataError(f"dimension mismatch: {x.shape} vs {v.shape}")
    diff = x - v
    return float(w * np.dot(diff, diff))


def _weighted_distances(X: np.ndarray, V: np.ndarray, weights: np.ndarray) -> np.ndarray:
    if X.shape[1] != V.shape[1]:
        raise DataError(f"dimension mismatch: data has {X.shape[1]} columns, centres {V.shape[1]}")
    return np.asarray(weights, dtype=float)[:, None] * cdist(X, V, "sqeuclidean")


def _memberships(d2: np.ndarray, q: float) -> np.ndarray:
    U = np.zeros_like(d2)
    singular = d2 <= 0.0
    has_singular = singular.any(axis=1)

    regular = ~has_singular
    if regular.any():
        # (1/d2)^(1/(q-1)) normalised per row, in log space.
        logs = -np.log(d2[regular]) / (q - 1.0)
        logs -= logs.max(axis=1, keepdims=True)
        e = np.exp(logs)
        U[regular] = e / e.sum(axis=1, keepdims=True)

    rows = np.flatnonzero(has_singular)
    U[rows, singular[rows].argmax(axis=1)] = 1.0
    return U


def update_memberships(
    X: np.ndarray, V: np.ndarray, weights: np.ndarray, q: float
) -> np.ndarray:
    """
    Membership matrix for fixed centres.

    A row at zero distance from some centre gets full membership in the first
    such centre and zero elsewhere.
    """
    if V.shape[0] < 2:
        raise DataError("at least two centres are required")
    return _memberships(_weighted_distances(X, V, weights), q)


def _update_centers(
    X: np.ndarray,
    U: np.ndarray,
    weights: np.ndarray,
    q: float,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, list[int]]:
    coef = np.asarray(weights, dtype=float)[:, None] * U**q
    den = coef.sum(axis=0)
    num = coef.T @ X

    V = np.empty_like(num)
    empty = den <= 0.0
    V[~empty] = num[~empty] / den[~empty, None]

    reinit = np.flatnonzero(empty)
    if reinit.size:
        rng = rng if rng is not None else np.random.default_rng(0)
        V[reinit] = X[rng.integers(0, X.shape[0], size=reinit.size)]
    return V, reinit.tolist()


def update_centers(
    X: np.ndarray,
    U: np.ndarray,
    weights: np.ndarray,
    q: float,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Weighted centre update; an empty cluster is reseeded from a random row."""
    V, reinit = _update_centers(X, U, weights, q, rng)
    if reinit:
        logger.warning("re-initialised empty clusters %s", reinit)
    return V


def objective(
    X: np.ndarray, U: np.ndarray, V: np.ndarray, weights: np.ndarray, q: float
) -> float:
    return float(np.sum(U**q * _weighted_distances(X, V, weights)))


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------

def _initial_centers(X: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    _, first = np.unique(X, axis=0, return_index=True)
    distinct = np.sort(first)
    if distinct.size >= c:
        pick = rng.choice(distinct, size=c, replace=False)
    else:
        logger.warning("only %d distinct rows for %d clusters; centres will coincide", distinct.size, c)
        pick = np.concatenate([distinct, rng.choice(X.shape[0], size=c - distinct.size)])
    return X[pick].copy()


def included_view(
    matrix: SessionMatrix, policy: ZeroWeightPolicy | str = ZeroWeightPolicy.EXCLUDE
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(X, weights, included_rows, excluded_rows)`` under a zero-weight policy."""
    policy = ZeroWeightPolicy(policy)
    weights = np.asarray(matrix.weights, dtype=float)
    if policy is ZeroWeightPolicy.EXCLUDE:
        included = np.flatnonzero(weights > 0)
        excluded = np.flatnonzero(weights <= 0)
        w = weights[included]
    else:
        included = np.arange(matrix.m)
        excluded = np.arange(0)
        w = np.where(weights > 0, weights, ZERO_WEIGHT_EPSILON)
    X = matrix.rows[included].toarray()
    return X, w, included, excluded


def run_fcm(
    matrix: SessionMatrix,
    cfg: FcmConfig,
    init_centers: Optional[np.ndarray] = None,
) -> FcmModel:
    """
    Alternate membership and centre updates until the largest membership
    change drops below ``cfg.tol`` or ``cfg.max_iter`` centre updates ran.
    """
    X, w, included, excluded = included_view(matrix, cfg.zero_weight_policy)
    if X.shape[0] < cfg.c:
        raise DataError(
            f"fewer sessions than clusters: {X.shape[0]} included sessions, c={cfg.c}"
        )

    rng = np.random.default_rng(cfg.seed)
    if init_centers is None:
        V = _initial_centers(X, cfg.c, rng)
    else:
        V = np.array(init_centers, dtype=float)
        if V.shape != (cfg.c, X.shape[1]):
            raise DataError(f"initial centres must have shape {(cfg.c, X.shape[1])}, got {V.shape}")

    U = update_memberships(X, V, w, cfg.q)
    J_trace = [objective(X, U, V, w, cfg.q)]
    reinitialized: list[tuple[int, int]] = []
    converged = False
    iterations = 0

    for iterations in range(1, cfg.max_iter + 1):
        V, reinit = _update_centers(X, U, w, cfg.q, rng)
        if reinit:
            logger.warning("iteration %d: re-initialised empty clusters %s", iterations, reinit)
            reinitialized.extend((iterations, j) for j in reinit)
        U_next = update_memberships(X, V, w, cfg.q)
        J_trace.append(objective(X, U_next, V, w, cfg.q))
        delta = float(np.max(np.abs(U_next - U)))
        U = U_next
        if delta < cfg.tol:
            converged = True
            break

    logger.debug(
        "fcm c=%d seed=%d: %d iterations, converged=%s, J=%.6g",
        cfg.c, cfg.seed, iterations, converged, J_trace[-1],
    )
    return FcmModel(
        U=U,
        V=V,
        J_trace=J_trace,
        iterations=iterations,
        converged=converged,
        config=cfg,
        included_rows=tuple(int(i) for i in included),
        excluded_rows=tuple(int(i) for i in excluded),
        weights=w,
        reinitialized=reinitialized,
    )


# ---------------------------------------------------------------------------
# Usage profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """One cluster seen as a usage profile."""

    cluster: int
    center: np.ndarray
    top_urls: tuple[int, ...]
    top_scores: tuple[float, ...]
    members: tuple[tuple[int, float], ...]


def extract_profiles(
    model: FcmModel,
    matrix: SessionMatrix,
    catalog: Optional[Sequence[int]] = None,
    top_k: int = 10,
    membership_threshold: float = 0.3,
) -> list[Profile]:
    """
    Rank URLs per cluster by centre coordinate and list member sessions.

    Members are matrix rows whose membership reaches ``membership_threshold``;
    a session may belong to several profiles.
    """
    catalog = tuple(catalog if catalog is not None else matrix.column_catalog)
    profiles = []
    for j, center in enumerate(model.V):
        order = sorted(range(len(center)), key=lambda k: (-center[k], k))[:top_k]
        members = sorted(
            (
                (model.included_rows[i], float(u))
                for i, u in enumerate(model.U[:, j])
                if u >= membership_threshold
            ),
            key=lambda item: (-item[1], item[0]),
        )
        profiles.append(
            Profile(
                cluster=j,
                center=center.copy(),
                top_urls=tuple(catalog[k] for k in order),
                top_scores=tuple(float(center[k]) for k in order),
                members=tuple(members),
            )
        )
    return profiles
