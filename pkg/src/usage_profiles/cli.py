"""Command-line interface: ``usage-profiles <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import pathlib
import sys
from dataclasses import fields
from typing import Any, Callable, Optional, Sequence

import pandas as pd

from . import __version__, storage
from .config import PipelineConfig
from .display import EXIT_OK, EXIT_VALIDATION, echo, exit_code_for, render_error
from .exceptions import DataError
from .fcm import extract_profiles, run_fcm
from .pipeline import (
    build_features,
    compare_heuristics,
    clamped_sweep,
    compare_weighting,
    run_clean,
    run_pipeline,
    run_sessionize,
)
from .report import SERIES_ORDER, emit_report, read_run_report
from .synthetic import CorpusSpec, generate_log

logger = logging.getLogger("usage_profiles")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_CONFIG_KEYS = {f.name for f in fields(PipelineConfig)}


# ---------------------------------------------------------------------------
# Option groups
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, metavar="FILE",
                   help="Flat key=value config file. Explicit flags override values in the file.")
    p.add_argument("-i", "--input", default=None, metavar="PATH", help="Input of this command")
    p.add_argument("-o", "--output", dest="output_dir", default=None, metavar="DIR",
                   help="Output directory (default: run)")
    p.add_argument("--seed", type=int, default=None, help="Root random seed (default: 0)")
    p.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    p.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")


def _add_clean_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--suffixes", dest="suffixes_file", default=None, metavar="FILE",
                   help="File of URL suffixes to drop, one per line")
    p.add_argument("--robots", dest="robots_file", default=None, metavar="FILE",
                   help="File of robot user-agent substrings, one per line")
    p.add_argument("--strip-query", dest="strip_query", action=argparse.BooleanOptionalAction,
                   default=None, help="Strip ?query and #fragment from URLs (default: on)")
    p.add_argument("--keep-status", dest="keep_status", default=None, metavar="CODES",
                   help="Comma-separated status codes to keep (default: all)")


def _add_session_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--heuristic", choices=["toh1", "toh2"], default=None,
                   help="toh1: total session time; toh2: page-stay time (default: toh1)")
    p.add_argument("--beta-seconds", dest="beta_seconds", type=float, default=None,
                   help="Session time threshold in seconds (default: 1800)")


def _add_feature_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-access", dest="min_access", type=int, default=None,
                   help="Drop URLs accessed fewer times (default: 2)")
    p.add_argument("--min-session-support", dest="min_session_support", type=int, default=None,
                   help="Drop URLs in fewer sessions (default: 2)")
    p.add_argument("--scheme", choices=["binary", "frequency"], default=None)
    p.add_argument("--lb", type=int, default=None, help="Weight is 0 at or below this size (default: 1)")
    p.add_argument("--ub", type=int, default=None, help="Weight is 1 at or above this size (default: 6)")


def _add_fcm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", type=float, default=None, help="Fuzzifier, > 1 (default: 2.0)")
    p.add_argument("--tol", type=float, default=None, help="Membership change tolerance (default: 1e-5)")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None, help="(default: 300)")
    p.add_argument("--zero-weight", dest="zero_weight", choices=["exclude", "epsilon"], default=None,
                   help="Handling of sessions with weight 0 (default: exclude)")
    p.add_argument("--top-k", dest="top_k", type=int, default=None,
                   help="URLs listed per profile (default: 10)")
    p.add_argument("--membership-threshold", dest="membership_threshold", type=float, default=None,
                   help="Minimum membership for a session to be listed under a profile (default: 0.3)")


def _add_sweep_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c-min", dest="c_min", type=int, default=None, help="(default: 2)")
    p.add_argument("--c-max", dest="c_max", type=int, default=None, help="(default: 60)")
    p.add_argument("--restarts", type=int, default=None, help="Random restarts per c (default: 5)")
    p.add_argument("--validity-weighted", dest="validity_weighted", action="store_true", default=None,
                   help="Use weighted distances in the validity index")
    p.add_argument("--hard-min-urls", dest="hard_min_urls", type=int, default=None,
                   help="Also sweep a baseline that drops sessions below this size (default: off)")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _require_input(cfg: PipelineConfig, what: str) -> pathlib.Path:
    if not cfg.input:
        raise DataError(f"--input is required: {what}")
    return pathlib.Path(cfg.input)


def _read_features(matrix_path: pathlib.Path):
    """The matrix plus catalog.tsv / rows.tsv when they sit next to it."""
    catalog = matrix_path.with_name("catalog.tsv")
    labels = matrix_path.with_name("rows.tsv")
    matrix = storage.read_matrix(
        matrix_path,
        catalog if catalog.exists() else None,
        labels if labels.exists() else None,
    )
    urls = storage.read_catalog_urls(catalog) if catalog.exists() else {}
    return matrix, urls


def cmd_clean(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    _require_input(cfg, "path of the access log")
    _, url_map, stats = run_clean(cfg, pathlib.Path(cfg.output_dir))
    echo(
        f"{stats.input_lines} lines: {stats.kept} kept, {stats.parse_errors} malformed, "
        f"{stats.dropped_suffix} suffix, {stats.dropped_robot} robot, {stats.dropped_status} status; "
        f"{len(url_map)} urls"
    )


def cmd_sessionize(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    cleaned = storage.read_cleaned(_require_input(cfg, "path of cleaned.tsv"))
    users, sessions = run_sessionize(cleaned, cfg.heuristic, cfg.beta_seconds, pathlib.Path(cfg.output_dir))
    echo(f"{len(users)} users, {len(sessions)} sessions ({cfg.heuristic.value}, beta={cfg.beta_seconds:g}s)")


def cmd_features(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    sessions = storage.read_sessions(_require_input(cfg, "path of sessions.tsv"))
    url_map = storage.read_url_map(args.url_map) if args.url_map else None
    features = build_features(sessions, cfg, pathlib.Path(cfg.output_dir), url_map)
    m = features.matrix
    echo(f"matrix {m.m} x {m.n} ({m.scheme.value}), {m.zero_weight_rows.size} zero-weight sessions")


def cmd_cluster(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    matrix, urls = _read_features(_require_input(cfg, "path of matrix.txt"))
    model = run_fcm(matrix, cfg.fcm_config())
    profiles = extract_profiles(
        model, matrix, top_k=cfg.top_k, membership_threshold=cfg.membership_threshold
    )
    out = pathlib.Path(cfg.output_dir) / "cluster"
    storage.write_model(model, out / "model.json")
    storage.write_profiles(profiles, out / "profiles.txt", urls=urls, labels=matrix.labels)
    echo(
        f"c={model.c}: J={model.objective:.6g} after {model.iterations} iterations"
        f"{'' if model.converged else ' (not converged)'}"
    )


def cmd_sweep(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    matrix, urls = _read_features(_require_input(cfg, "path of matrix.txt"))
    report = clamped_sweep(matrix, cfg, cfg.seed)
    out = pathlib.Path(cfg.output_dir) / "cluster"
    storage.write_validity(report.to_dataframe(), out / "validity.csv")
    model = report.best_model
    storage.write_model(model, out / "model.json")
    profiles = extract_profiles(
        model, matrix, top_k=cfg.top_k, membership_threshold=cfg.membership_threshold
    )
    storage.write_profiles(profiles, out / "profiles.txt", urls=urls, labels=matrix.labels)
    echo(f"chosen c = {report.chosen_c} ({len(report)} values of c evaluated)")


def cmd_compare_weighting(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    matrix, _ = _read_features(_require_input(cfg, "path of matrix.txt"))
    reports = compare_weighting(matrix, cfg, seed=cfg.seed)
    out = pathlib.Path(cfg.output_dir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    names = [s for s in SERIES_ORDER if s in reports]
    frame: Optional[pd.DataFrame] = None
    for name in names:
        df = reports[name].to_dataframe().rename(columns={"J": f"J_{name}", "S": f"S_{name}"})
        frame = df if frame is None else frame.merge(df, on="c", how="outer")
    frame.sort_values("c").to_csv(out / "weighting_vs_c.csv", index=False)
    echo(", ".join(f"{name}: chosen c = {reports[name].chosen_c}" for name in names))


def cmd_compare_heuristics(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    cleaned = storage.read_cleaned(_require_input(cfg, "path of cleaned.tsv"))
    frame = compare_heuristics(cleaned, cfg.beta_seconds)
    out = pathlib.Path(cfg.output_dir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out / "heuristics.csv", index=False)
    total = frame.iloc[-1]
    echo(f"toh1: {total['toh1_sessions']} sessions, toh2: {total['toh2_sessions']} sessions")


def cmd_report(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    source = _require_input(cfg, "run directory or run_report.json")
    if source.is_dir():
        source = source / "report" / "run_report.json"
    report = read_run_report(source)
    written = emit_report(report, pathlib.Path(cfg.output_dir) / "report")
    echo(f"wrote {len(written)} files to {written[0].parent}")


def cmd_pipeline(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    report = run_pipeline(cfg)
    echo(repr(report))


def cmd_gen_fixture(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    spec = CorpusSpec(
        groups=args.groups,
        sessions_per_group=args.sessions_per_group,
        noise_sessions=args.noise_sessions,
    )
    lines = generate_log(cfg.seed, spec)
    target = pathlib.Path(args.log_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    echo(f"wrote {len(lines)} lines to {target}")


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------

_COMMANDS: dict[str, tuple[Callable[[argparse.Namespace, PipelineConfig], None], str, tuple]] = {
    "clean": (cmd_clean, "Parse and clean a raw access log", (_add_clean_flags,)),
    "sessionize": (cmd_sessionize, "Identify users and split them into sessions", (_add_session_flags,)),
    "features": (cmd_features, "Filter URLs, weight sessions and build the matrix", (_add_feature_flags,)),
    "cluster": (cmd_cluster, "Run weighted fuzzy c-means for one c", (_add_fcm_flags,)),
    "sweep": (cmd_sweep, "Sweep c and pick it by the validity index", (_add_fcm_flags, _add_sweep_flags)),
    "compare-weighting": (
        cmd_compare_weighting,
        "Sweep with fuzzy weights and with unit weights",
        (_add_fcm_flags, _add_sweep_flags),
    ),
    "compare-heuristics": (
        cmd_compare_heuristics,
        "Per-user session counts under both heuristics",
        (_add_session_flags,),
    ),
    "report": (cmd_report, "Re-render the report files of a finished run", ()),
    "pipeline": (
        cmd_pipeline,
        "Run every stage from raw log to report",
        (_add_clean_flags, _add_session_flags, _add_feature_flags, _add_fcm_flags, _add_sweep_flags),
    ),
    "gen-fixture": (cmd_gen_fixture, "Write a synthetic access log with planted groups", ()),
}


class _Parser(argparse.ArgumentParser):
    """Bad arguments are configuration errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="usage-profiles",
        description="Mine fuzzy usage profiles from web proxy access logs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (func, help_text, groups) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        _add_common(p)
        for add in groups:
            add(p)
        p.set_defaults(func=func)

    sub.choices["cluster"].add_argument(
        "--c", type=int, default=None, help="Number of clusters (default: 8)"
    )
    sub.choices["features"].add_argument(
        "--url-map", dest="url_map", default=None, metavar="FILE",
        help="url_map.tsv from the clean stage, to name the columns",
    )
    gen = sub.choices["gen-fixture"]
    gen.add_argument("--log", dest="log_path", default="fixture/access.log", metavar="FILE",
                     help="Where to write the log (default: fixture/access.log)")
    gen.add_argument("--groups", type=int, default=CorpusSpec.groups)
    gen.add_argument("--sessions-per-group", dest="sessions_per_group", type=int,
                     default=CorpusSpec.sessions_per_group)
    gen.add_argument("--noise-sessions", dest="noise_sessions", type=int,
                     default=CorpusSpec.noise_sessions)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k in _CONFIG_KEYS and v is not None}


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the ``usage-profiles`` script.

    Settings are resolved in this priority order (highest first):
      1. Explicit flags
      2. --config <file>
      3. USAGE_PROFILES_<KEY> environment variables
      4. Built-in defaults

    Returns the process exit code: 0 on success, 1 for invalid
    configuration or bad arguments, 2 for a failed stage, 3 for an I/O error.

    Examples
    --------
    usage-profiles gen-fixture --log data/access.log --seed 3
    usage-profiles pipeline -i data/access.log -o run1
    usage-profiles clean -i data/access.log -o run1 --keep-status 200,304
    usage-profiles sweep -i run1/features/matrix.txt -o run1 --c-max 20
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    configure_logging(args.verbose, args.quiet)
    try:
        cfg = PipelineConfig.resolve(args.config, _overrides(args)).validate()
        logger.debug("effective config: %r", cfg)
        args.func(args, cfg)
    except Exception as exc:  # noqa: BLE001
        logger.debug("command %s failed", args.command, exc_info=True)
        echo(render_error(exc))
        return exit_code_for(exc)
    return EXIT_OK
