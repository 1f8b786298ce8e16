"""
usage-profiles
==============

Mine fuzzy usage profiles from web proxy access logs.

Usage
-----
Run every stage on a Squid access log::

    usage-profiles pipeline -i access.log -o run1

Or drive the stages from Python::

    from usage_profiles import PipelineConfig, run_pipeline

    report = run_pipeline(PipelineConfig(input="access.log", output_dir="run1", c_max=20))
    report.validity_frame()

Cluster a matrix you built yourself::

    from usage_profiles import FcmConfig, run_fcm, vectorize

    matrix = vectorize(sessions)
    model = run_fcm(matrix, FcmConfig(c=4, seed=1))
    model.U.argmax(axis=0)
"""

__version__ = "0.1.0"

from .config import PipelineConfig
from .exceptions import ConfigError, DataError, LogParseError, StageError, UsageProfilesError
from .features import Scheme, SessionMatrix, WeightConfig, assign_session_weight, vectorize
from .fcm import FcmConfig, FcmModel, ZeroWeightPolicy, extract_profiles, run_fcm
from .log_ingest import CleanPolicy, clean_log, parse_log_line
from .pipeline import run_pipeline
from .report import RunReport
from .sessionizer import Heuristic, Session, identify_users, sessionize
from .validity import ValidityReport, sweep_clusters, xie_beni

__all__ = [
    "PipelineConfig",
    "UsageProfilesError",
    "ConfigError",
    "DataError",
    "LogParseError",
    "StageError",
    "CleanPolicy",
    "parse_log_line",
    "clean_log",
    "Heuristic",
    "Session",
    "identify_users",
    "sessionize",
    "Scheme",
    "SessionMatrix",
    "WeightConfig",
    "assign_session_weight",
    "vectorize",
    "FcmConfig",
    "FcmModel",
    "ZeroWeightPolicy",
    "run_fcm",
    "extract_profiles",
    "ValidityReport",
    "sweep_clusters",
    "xie_beni",
    "RunReport",
    "run_pipeline",
]
