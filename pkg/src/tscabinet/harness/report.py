"""Experiment output: long-format CSVs for plotting and a plain-text summary."""

from __future__ import annotations

import csv
import sys
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from ..forecasting.evaluation import write_metrics
from .experiment import ExperimentReport, PolicyResult

REPORT_HEADER = ("policy", "capacity", "metric", "value")
OCCUPANCY_HEADER = ("policy", "capacity", "tick", "cloud_points", "edge_points")
REPORT_FILE = "report.csv"
OCCUPANCY_FILE = "occupancy.csv"
FORECAST_FILE = "forecast_metrics.csv"

# (metric name, how to read it off a PolicyResult); runtimes are left out so
# reruns produce identical bytes
METRICS = (
    ("hit_rate", lambda r: r.hit_rate),
    ("queries", lambda r: r.queries),
    ("hits", lambda r: r.hits),
    ("misses", lambda r: r.misses),
    ("summarized_misses", lambda r: r.summarized_misses),
    ("served_cloud", lambda r: r.served_cloud),
    ("served_edge", lambda r: r.served_edge),
    ("preheat_actions", lambda r: r.preheat_actions),
    ("demote_actions", lambda r: r.demote_actions),
    ("summarize_actions", lambda r: r.summarize_actions),
    ("preheated_points", lambda r: r.preheated_points),
    ("forecasting_calls", lambda r: r.calls.forecasting),
    ("frequent_calls", lambda r: r.calls.frequent),
)


def _fmt(value: float | int) -> str:
    return str(value) if isinstance(value, int) else f"{value:.6f}"


def _results(reports: ExperimentReport | Sequence[ExperimentReport]) -> list[PolicyResult]:
    if isinstance(reports, ExperimentReport):
        reports = [reports]
    return [r for rep in reports for r in rep.results]


def report_rows(reports: ExperimentReport | Sequence[ExperimentReport]) -> list[tuple[str, int, str, str]]:
    return [(r.policy, r.capacity, name, _fmt(get(r))) for r in _results(reports) for name, get in METRICS]


def write_report_csv(rows: Iterable[tuple], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        w.writerows(rows)


def read_report_csv(path: str | Path) -> list[tuple[str, int, str, str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != REPORT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(REPORT_HEADER)}, got {','.join(header)}")
        return [(p, int(c), m, v) for p, c, m, v in reader]


def summary_text(rows: Sequence[tuple[str, int, str, str]]) -> str:
    """One line per (policy, capacity): hit rate and the counts behind it."""
    table: dict[tuple[str, int], dict[str, str]] = {}
    for policy, cap, metric, value in rows:
        table.setdefault((policy, int(cap)), {})[metric] = value
    if not table:
        return "no results\n"
    width = max(len(p) for p, _ in table)
    lines = [f"{'policy':<{width}}  {'capacity':>9}  {'hit_rate':>8}  {'hits':>7}  {'queries':>7}  {'preheats':>8}"]
    for (policy, cap), m in table.items():
        lines.append(
            f"{policy:<{width}}  {cap:>9}  {float(m.get('hit_rate', 'nan')):>8.4f}  "
            f"{m.get('hits', '-'):>7}  {m.get('queries', '-'):>7}  {m.get('preheat_actions', '-'):>8}"
        )
    return "\n".join(lines) + "\n"


def emit_report(
    reports: ExperimentReport | Sequence[ExperimentReport],
    out_dir: str | Path,
    stream: TextIO | None = None,
    plan_logs: bool = True,
) -> list[Path]:
    """Write the report files into ``out_dir`` and print the summary.

    Files: ``report.csv`` (one row per policy, capacity and metric),
    ``occupancy.csv``, ``forecast_metrics.csv`` and one migration log per
    run that planned anything.  Returns the paths written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = _results(reports)
    rows = report_rows(reports)
    written = [out / REPORT_FILE, out / OCCUPANCY_FILE, out / FORECAST_FILE]
    write_report_csv(rows, written[0])
    with open(written[1], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OCCUPANCY_HEADER)
        for r in results:
            w.writerows((r.policy, r.capacity, tick, cloud, edge) for tick, cloud, edge in r.occupancy)
    reps = [reports] if isinstance(reports, ExperimentReport) else list(reports)
    write_metrics([row for rep in reps for row in rep.forecast_metrics], written[2])
    if plan_logs:
        for r in results:
            if r.plan_log:
                path = out / f"plan_{r.policy.lower()}_{r.capacity}.log"
                path.write_text("\n".join(r.plan_log) + "\n")
                written.append(path)
    (stream or sys.stdout).write(summary_text(rows))
    return written
