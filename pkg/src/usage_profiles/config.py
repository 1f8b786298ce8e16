"""Pipeline configuration: defaults, env vars, a flat key=value file and flags."""

from __future__ import annotations

import os
import pathlib
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Callable, Mapping, Optional

from dotenv import dotenv_values

from .exceptions import ConfigError
from .features import Scheme, WeightConfig
from .fcm import FcmConfig, ZeroWeightPolicy
from .log_ingest import CleanPolicy
from .sessionizer import Heuristic

ENV_PREFIX = "USAGE_PROFILES_"


def _to_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in {"1", "true", "yes", "on"}:
        return True
    if lowered in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _to_status_list(value: str) -> Optional[tuple[int, ...]]:
    value = value.strip()
    if value in {"", "all"}:
        return None
    return tuple(sorted(int(v) for v in value.split(",") if v.strip()))


def _optional_str(value: str) -> Optional[str]:
    return value or None


_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "input": _optional_str,
    "output_dir": str,
    "suffixes_file": _optional_str,
    "robots_file": _optional_str,
    "strip_query": _to_bool,
    "keep_status": _to_status_list,
    "heuristic": Heuristic,
    "beta_seconds": float,
    "min_access": int,
    "min_session_support": int,
    "scheme": Scheme,
    "lb": int,
    "ub": int,
    "c": int,
    "q": float,
    "tol": float,
    "max_iter": int,
    "seed": int,
    "zero_weight": ZeroWeightPolicy,
    "c_min": int,
    "c_max": int,
    "restarts": int,
    "validity_weighted": _to_bool,
    "top_k": int,
    "membership_threshold": float,
    "hard_min_urls": int,
}


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the pipeline, plus input and output locations."""

    input: Optional[str] = None
    output_dir: str = "run"
    suffixes_file: Optional[str] = None
    robots_file: Optional[str] = None
    strip_query: bool = True
    keep_status: Optional[tuple[int, ...]] = None
    heuristic: Heuristic = Heuristic.TOH1
    beta_seconds: float = 1800.0
    min_access: int = 2
    min_session_support: int = 2
    scheme: Scheme = Scheme.BINARY
    lb: int = 1
    ub: int = 6
    c: int = 8
    q: float = 2.0
    tol: float = 1e-5
    max_iter: int = 300
    seed: int = 0
    zero_weight: ZeroWeightPolicy = ZeroWeightPolicy.EXCLUDE
    c_min: int = 2
    c_max: int = 60
    restarts: int = 5
    validity_weighted: bool = False
    top_k: int = 10
    membership_threshold: float = 0.3
    hard_min_urls: int = 0

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], source: str = "config") -> "PipelineConfig":
        """Build from string (or already typed) values; unknown keys are rejected."""
        return cls().updated(values, source)

    @classmethod
    def from_file(cls, path: str | pathlib.Path) -> "PipelineConfig":
        """Read a flat ``key=value`` file."""
        return cls.from_env().updated(_read_config_file(path), str(path))

    @classmethod
    def from_env(cls) -> "PipelineConfig":
        """Defaults overridden by ``USAGE_PROFILES_<KEY>`` environment variables."""
        values = {
            key: os.environ[ENV_PREFIX + key.upper()]
            for key in _CONVERTERS
            if ENV_PREFIX + key.upper() in os.environ
        }
        return cls().updated(values, "environment")

    @classmethod
    def resolve(
        cls,
        config_file: Optional[str] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> "PipelineConfig":
        """
        Resolve the effective config. Priority (highest first): ``overrides``
        (CLI flags), ``config_file``, environment variables, defaults.
        """
        cfg = cls.from_file(config_file) if config_file else cls.from_env()
        if overrides:
            cfg = cfg.updated({k: v for k, v in overrides.items() if v is not None}, "flags")
        return cfg

    def updated(self, values: Mapping[str, Any], source: str = "config") -> "PipelineConfig":
        unknown = sorted(set(values) - set(_CONVERTERS))
        if unknown:
            raise ConfigError(f"unknown {source} keys: {', '.join(unknown)}")
        converted = {}
        for key, value in values.items():
            if isinstance(value, str):
                try:
                    value = _CONVERTERS[key](value)
                except ValueError as exc:
                    raise ConfigError(f"{source}: invalid value for {key!r}: {exc}") from None
            converted[key] = value
        return replace(self, **converted)

    # ------------------------------------------------------------------
    # Validation and derived configs
    # ------------------------------------------------------------------

    def validate(self) -> "PipelineConfig":
        problems = []
        if self.lb < 0:
            problems.append(f"lb must be >= 0 (got {self.lb})")
        if self.ub <= self.lb:
            problems.append(f"ub must be greater than lb (got lb={self.lb}, ub={self.ub})")
        if not self.beta_seconds > 0:
            problems.append(f"beta_seconds must be > 0 (got {self.beta_seconds})")
        if not self.q > 1:
            problems.append(f"q must be > 1 (got {self.q})")
        if not self.tol > 0:
            problems.append(f"tol must be > 0 (got {self.tol})")
        if self.max_iter < 1:
            problems.append(f"max_iter must be >= 1 (got {self.max_iter})")
        if self.c < 2:
            problems.append(f"c must be >= 2 (got {self.c})")
        if self.c_min < 2 or self.c_max < self.c_min:
            problems.append(f"need 2 <= c_min <= c_max (got {self.c_min}, {self.c_max})")
        if self.seed < 0:
            problems.append(f"seed must be >= 0 (got {self.seed})")
        if self.restarts < 1:
            problems.append(f"restarts must be >= 1 (got {self.restarts})")
        if self.min_access < 1 or self.min_session_support < 1:
            problems.append("support thresholds must be >= 1")
        if self.membership_threshold < 0:
            problems.append("membership_threshold must be >= 0")
        if self.hard_min_urls < 0:
            problems.append("hard_min_urls must be >= 0")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def clean_policy(self) -> CleanPolicy:
        return CleanPolicy.from_files(
            self.suffixes_file,
            self.robots_file,
            strip_query=self.strip_query,
            keep_status=self.keep_status,
        )

    def weight_config(self) -> WeightConfig:
        return WeightConfig(lb=self.lb, ub=self.ub)

    def fcm_config(self, c: Optional[int] = None, seed: Optional[int] = None) -> FcmConfig:
        return FcmConfig(
            c=self.c if c is None else c,
            q=self.q,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=self.seed if seed is None else seed,
            zero_weight_policy=self.zero_weight,
        )

    # ------------------------------------------------------------------
    # Rendering
    # ------------------------------------------------------------------

    def to_lines(self) -> list[str]:
        """Sorted ``key=value`` lines that :meth:`from_file` reads back."""
        lines = []
        for key, value in sorted(asdict(self).items()):
            lines.append(f"{key}={_render_value(value)}")
        return lines

    def __repr__(self) -> str:
        changed = {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if getattr(self, f.name) != f.default
        }
        return f"PipelineConfig({', '.join(f'{k}={v!r}' for k, v in changed.items())})"


def _render_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if hasattr(value, "value"):
        return str(value.value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _read_config_file(path: str | pathlib.Path) -> dict[str, str]:
    config_path = pathlib.Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {path}")
    return {k: (v or "") for k, v in dotenv_values(config_path).items()}
