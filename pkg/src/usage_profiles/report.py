"""RunReport: collected results of a pipeline run and their CSV / text rendering."""

from __future__ import annotations

import json
import pathlib
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any

import pandas as pd

from .log_ingest import CleanStats
from .sessionizer import SessionStats

REPORT_FILES = (
    "url_access_hist.csv",
    "url_session_support.csv",
    "session_size_hist.csv",
    "perf_index_vs_c.csv",
    "validity_vs_c.csv",
    "summary.txt",
)

SERIES_ORDER = ("weighted", "unweighted", "hard")


@dataclass
class SeriesResult:
    """One sweep: rows of (c, J, S) and the chosen c."""

    rows: list[tuple[int, float, float]]
    chosen_c: int
    skipped: dict[int, str] = field(default_factory=dict)


@dataclass
class RunReport:
    """
    Everything a run reports.

    Attributes
    ----------
    url_access : dict[int, int]
        Total accesses per url id, before any support filtering.
    url_session_support : dict[int, int]
        Session support per url id after the access-count filter.
    session_sizes : list[int]
        Unique URL count of every session, before filtering.
    series : dict[str, SeriesResult]
        Validity sweeps keyed by weighting (``weighted``, ``unweighted``, ``hard``).
    """

    clean_stats: CleanStats
    user_count: int
    session_stats: dict[str, SessionStats]
    url_access: dict[int, int]
    url_session_support: dict[int, int]
    session_sizes: list[int]
    weights: list[float]
    matrix_shape: tuple[int, int]
    retained_urls: int
    series: dict[str, SeriesResult]
    model_summary: dict[str, Any] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    # ------------------------------------------------------------------
    # Data series
    # ------------------------------------------------------------------

    def url_access_hist(self) -> pd.DataFrame:
        counts = Counter(self.url_access.values())
        total = len(self.url_access)
        rows = [(k, n, 100.0 * n / total) for k, n in sorted(counts.items())]
        return pd.DataFrame(rows, columns=["access_count", "url_count", "url_percent"])

    def url_session_support_hist(self) -> pd.DataFrame:
        counts = Counter(self.url_session_support.values())
        return pd.DataFrame(sorted(counts.items()), columns=["session_support", "url_count"])

    def session_size_hist(self) -> pd.DataFrame:
        counts = Counter(self.session_sizes)
        return pd.DataFrame(sorted(counts.items()), columns=["unique_urls", "session_count"])

    def weight_hist(self) -> pd.DataFrame:
        counts = Counter(self.weights)
        return pd.DataFrame(sorted(counts.items()), columns=["weight", "session_count"])

    def _series_frame(self, column: int, prefix: str) -> pd.DataFrame:
        names = [s for s in SERIES_ORDER if s in self.series]
        grid = sorted({row[0] for s in names for row in self.series[s].rows})
        frame = pd.DataFrame({"c": grid})
        for name in names:
            values = {row[0]: row[column] for row in self.series[name].rows}
            frame[f"{prefix}_{name}"] = [values.get(c) for c in grid]
        return frame

    def perf_index_frame(self) -> pd.DataFrame:
        return self._series_frame(1, "J")

    def validity_frame(self) -> pd.DataFrame:
        return self._series_frame(2, "S")

    def access_breakdown(self) -> dict[str, float]:
        """Share of URLs accessed once, twice and three or more times (percent)."""
        counts = list(self.url_access.values())
        if not counts:
            return {"once": 0.0, "twice": 0.0, "three_plus": 0.0, "max": 0, "mean": 0.0}
        total = len(counts)
        return {
            "once": 100.0 * sum(1 for n in counts if n == 1) / total,
            "twice": 100.0 * sum(1 for n in counts if n == 2) / total,
            "three_plus": 100.0 * sum(1 for n in counts if n >= 3) / total,
            "max": max(counts),
            "mean": sum(counts) / total,
        }

    # ------------------------------------------------------------------
    # Text summary
    # ------------------------------------------------------------------

    def summary_text(self) -> str:
        cs = self.clean_stats
        out = [
            "usage-profiles run summary",
            "",
            "[cleaning]",
            f"input lines        {cs.input_lines}",
            f"parse errors       {cs.parse_errors}",
            f"dropped (suffix)   {cs.dropped_suffix}",
            f"dropped (robot)    {cs.dropped_robot}",
            f"dropped (status)   {cs.dropped_status}",
            f"kept               {cs.kept}",
            f"users              {self.user_count}",
            "",
            "[urls]",
        ]
        breakdown = self.access_breakdown()
        out += [
            f"distinct urls      {len(self.url_access)}",
            f"accessed once      {breakdown['once']:.2f}%",
            f"accessed twice     {breakdown['twice']:.2f}%",
            f"accessed 3+ times  {breakdown['three_plus']:.2f}%",
            f"max access count   {breakdown['max']}",
            f"mean access count  {breakdown['mean']:.2f}",
            f"retained urls      {self.retained_urls}",
            "",
        ]
        for name, st in sorted(self.session_stats.items()):
            out += [
                f"[sessions {name}]",
                f"sessions           {st.session_count}",
                f"urls per session   min {st.min_raw} max {st.max_raw} avg {st.avg_raw:.2f}",
                f"unique per session min {st.min_unique} max {st.max_unique} avg {st.avg_unique:.2f}",
                "",
            ]
        out.append("[session weights]")
        for row in self.weight_hist().itertuples(index=False):
            out.append(f"w={row.weight:.4f}  {row.session_count}")
        m, n = self.matrix_shape
        out += ["", "[feature matrix]", f"sessions x urls    {m} x {n}", "", "[validity]"]
        for name in (s for s in SERIES_ORDER if s in self.series):
            res = self.series[name]
            skipped = f" (skipped c: {', '.join(map(str, sorted(res.skipped)))})" if res.skipped else ""
            out.append(f"{name:<18} chosen c = {res.chosen_c}{skipped}")
        if self.model_summary:
            ms = self.model_summary
            out += [
                "",
                "[chosen model]",
                f"c                  {ms['c']}",
                f"iterations         {ms['iterations']}",
                f"converged          {ms['converged']}",
                f"objective J        {ms['J']:.6g}",
                f"excluded sessions  {ms['excluded']}",
            ]
            for k, urls in enumerate(ms.get("profiles", []), 1):
                out.append(f"profile {k:<10} {' '.join(map(str, urls))}")
        return "\n".join(out) + "\n"

    # ------------------------------------------------------------------
    # Serialisation
    # ------------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready form; timings are left out so the file is reproducible."""
        return {
            "clean_stats": asdict(self.clean_stats),
            "user_count": self.user_count,
            "session_stats": {k: asdict(v) for k, v in sorted(self.session_stats.items())},
            "url_access": [[u, n] for u, n in sorted(self.url_access.items())],
            "url_session_support": [[u, n] for u, n in sorted(self.url_session_support.items())],
            "session_sizes": list(self.session_sizes),
            "weights": list(self.weights),
            "matrix_shape": list(self.matrix_shape),
            "retained_urls": self.retained_urls,
            "series": {
                name: {
                    "rows": [list(r) for r in res.rows],
                    "chosen_c": res.chosen_c,
                    "skipped": [[c, why] for c, why in sorted(res.skipped.items())],
                }
                for name, res in self.series.items()
            },
            "model_summary": self.model_summary,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunReport":
        return cls(
            clean_stats=CleanStats(**data["clean_stats"]),
            user_count=data["user_count"],
            session_stats={k: SessionStats(**v) for k, v in data["session_stats"].items()},
            url_access={u: n for u, n in data["url_access"]},
            url_session_support={u: n for u, n in data["url_session_support"]},
            session_sizes=list(data["session_sizes"]),
            weights=list(data["weights"]),
            matrix_shape=tuple(data["matrix_shape"]),
            retained_urls=data["retained_urls"],
            series={
                name: SeriesResult(
                    rows=[tuple(r) for r in res["rows"]],
                    chosen_c=res["chosen_c"],
                    skipped={c: why for c, why in res["skipped"]},
                )
                for name, res in data["series"].items()
            },
            model_summary=data.get("model_summary", {}),
        )

    def __repr__(self) -> str:
        chosen = ", ".join(f"{k}={v.chosen_c}" for k, v in self.series.items())
        return (
            f"RunReport({self.clean_stats.kept} records, {self.user_count} users, "
            f"{self.matrix_shape[0]}x{self.matrix_shape[1]} matrix, chosen c: {chosen})"
        )


def write_run_report(report: RunReport, path: str | pathlib.Path) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")


def read_run_report(path: str | pathlib.Path) -> RunReport:
    return RunReport.from_dict(json.loads(pathlib.Path(path).read_text(encoding="utf-8")))


def emit_report(report: RunReport, out_dir: str | pathlib.Path) -> list[pathlib.Path]:
    """Write the five CSV series and the text summary; returns the written paths."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames = {
        "url_access_hist.csv": report.url_access_hist(),
        "url_session_support.csv": report.url_session_support_hist(),
        "session_size_hist.csv": report.session_size_hist(),
        "perf_index_vs_c.csv": report.perf_index_frame(),
        "validity_vs_c.csv": report.validity_frame(),
    }
    written = []
    for name, frame in frames.items():
        frame.to_csv(out / name, index=False)
        written.append(out / name)
    summary = out / "summary.txt"
    summary.write_text(report.summary_text(), encoding="utf-8")
    written.append(summary)
    return written


def write_timings(timings: dict[str, float], path: str | pathlib.Path) -> None:
    """Wall-clock seconds per stage; the one artifact that differs between runs."""
    pd.DataFrame(list(timings.items()), columns=["stage", "seconds"]).to_csv(path, index=False)
