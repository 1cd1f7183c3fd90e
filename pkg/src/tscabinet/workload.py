"""Synthetic query workloads built from five query templates and four arrival patterns."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

HOUR = 3600
DAY = 24 * HOUR

COMPARISONS = (">", ">=", "<", "<=", "=")
AGGREGATES = ("AVG", "MAX", "MIN")
SINGLE_SERIES_KINDS = (1, 3, 4)
MULTI_SERIES_KINDS = (2, 5)

DEFAULT_DURATIONS = (HOUR, 6 * HOUR, DAY, 7 * DAY)
# 80 % of ranges end within the last 24 h.
DEFAULT_RECENCY_RATE = math.log(5.0) / DAY


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Schema:
    """Shape of a time-series measurement: field keys, tag keys and the series present.

    ``series`` holds one tag-value tuple per series; its position is the series id.
    """

    measurement: str
    fields: tuple[str, ...]
    tags: tuple[str, ...]
    series: tuple[tuple[str, ...], ...]
    timestamp: str = "timestamp"


@dataclass(frozen=True)
class QueryTemplate:
    template_id: int
    kind: int
    fields: tuple[str, ...]
    series: tuple[int, ...]
    operator: str | None = None
    groupby: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in (1, 2, 3, 4, 5):
            raise ValueError(f"unknown template kind {self.kind}")
        if not self.fields:
            raise ValueError("a template selects at least one field")
        if self.kind in SINGLE_SERIES_KINDS and len(self.series) != 1:
            raise ValueError(f"kind {self.kind} selects exactly one series")
        if self.kind in MULTI_SERIES_KINDS and len(self.series) < 1:
            raise ValueError(f"kind {self.kind} selects a set of series")
        if self.kind == 3 and self.operator not in COMPARISONS:
            raise ValueError("kind 3 needs a comparison operator")
        if self.kind in (4, 5) and self.operator not in AGGREGATES:
            raise ValueError(f"kind {self.kind} needs an aggregate")
        if self.kind in (1, 2) and self.operator is not None:
            raise ValueError(f"kind {self.kind} takes no operator")
        if (self.groupby is not None) != (self.kind == 5):
            raise ValueError("group-by is present iff kind 5")

    def render(self, schema: Schema) -> str:
        """SQL-ish text for logs only."""
        cols = ", ".join(self.fields)
        if self.kind in (4, 5):
            cols = f"{self.operator}({cols})"
        if len(self.series) == 1:
            where = f"series = {self.series[0]}"
        else:
            where = "series IN {" + ", ".join(map(str, self.series)) + "}"
        sql = f"SELECT {cols} FROM {schema.measurement} WHERE {where} AND time >= ? AND time <= ?"
        if self.kind == 3:
            sql += f" AND {self.fields[0]} {self.operator} ?"
        if self.kind == 5:
            sql += f" GROUP BY {self.groupby}"
        return sql


@dataclass(frozen=True)
class Query:
    template_id: int
    kind: int
    series: tuple[int, ...]
    issue_ts: int
    t_start: int
    t_end: int
    fields: tuple[str, ...] = ()
    operator: str | None = None
    threshold: float | None = None

    def __post_init__(self) -> None:
        if not self.t_start <= self.t_end:
            raise ValueError(f"t_start {self.t_start} > t_end {self.t_end}")


# arrival patterns ---------------------------------------------------------


@dataclass(frozen=True)
class Stability:
    rate: float


@dataclass(frozen=True)
class Cycles:
    """Periodic rate: ``base_rate`` outside peaks, ``peak_rate`` inside ``(offset, width, peak_rate)`` windows."""

    period: int
    peak_windows: tuple[tuple[int, int, float], ...]
    base_rate: float

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ValueError("CYCLES period must be positive")


@dataclass(frozen=True)
class Spike:
    center: int
    peak_rate: float
    decay_constant: float

    def __post_init__(self) -> None:
        if self.decay_constant <= 0:
            raise ValueError("SPIKE decay constant must be positive")


@dataclass(frozen=True)
class Chaos:
    seed: int
    max_rate: float


ArrivalPattern = Union[Stability, Cycles, Spike, Chaos]


def _check_rates(pattern: ArrivalPattern) -> None:
    rates = {
        Stability: lambda p: [p.rate],
        Cycles: lambda p: [p.base_rate] + [w[2] for w in p.peak_windows],
        Spike: lambda p: [p.peak_rate],
        Chaos: lambda p: [p.max_rate],
    }[type(pattern)](pattern)
    if any(r < 0 for r in rates):
        raise ValueError(f"negative rate in {pattern!r}")


def _round(x: float) -> int:
    return int(math.floor(x + 0.5))


def rate_at(pattern: ArrivalPattern, t: int) -> float:
    """Instantaneous rate (queries per rate unit) at ``t``; CHAOS is not defined pointwise."""
    if isinstance(pattern, Stability):
        return pattern.rate
    if isinstance(pattern, Cycles):
        phase = t % pattern.period
        rate = pattern.base_rate
        for offset, width, peak in pattern.peak_windows:
            if (phase - offset) % pattern.period < width:
                rate = max(rate, peak)
        return rate
    if isinstance(pattern, Spike):
        return pattern.peak_rate * math.exp(-pattern.decay_constant * abs(t - pattern.center))
    raise TypeError(f"no pointwise rate for {type(pattern).__name__}")


def arrival_count(
    pattern: ArrivalPattern,
    interval: tuple[int, int],
    rng: np.random.Generator | None = None,
    unit: int = 300,
) -> int:
    """Number of queries a pattern emits over ``interval``.

    Rates are per ``unit`` seconds and are sampled at the interval start, so
    aligned intervals of periodic patterns repeat exactly.  CHAOS draws from
    its own seed keyed by the interval start, which keeps counts reproducible
    regardless of how many other draws ``rng`` has served.
    """
    t0, t1 = interval
    if t1 <= t0:
        raise ValueError(f"empty interval {interval}")
    _check_rates(pattern)
    length = (t1 - t0) / unit
    if isinstance(pattern, Chaos):
        local = np.random.default_rng([pattern.seed, int(t0)])
        return _round(local.uniform(0.0, pattern.max_rate) * length)
    return _round(rate_at(pattern, t0) * length)


# template summary ---------------------------------------------------------


def build_template_summary(schema: Schema, seed: int = 0, per_kind: int = 1) -> list[QueryTemplate]:
    """Instantiate ``per_kind`` templates of every kind against ``schema``."""
    if not schema.fields:
        raise SchemaError("schema has no field keys")
    if not schema.tags:
        raise SchemaError("schema has no tag keys")
    if not schema.series:
        raise SchemaError("schema has no series")
    rng = np.random.default_rng(seed)
    n_series = len(schema.series)
    out: list[QueryTemplate] = []
    tid = 0
    for _ in range(per_kind):
        for kind in (1, 2, 3, 4, 5):
            n_fields = int(rng.integers(1, len(schema.fields) + 1))
            fields = tuple(sorted(rng.choice(schema.fields, size=n_fields, replace=False).tolist()))
            if kind in SINGLE_SERIES_KINDS:
                series = (int(rng.integers(n_series)),)
            else:
                size = int(rng.integers(min(2, n_series), min(4, n_series) + 1))
                series = tuple(sorted(int(s) for s in rng.choice(n_series, size=size, replace=False)))
            operator = None
            if kind == 3:
                operator = str(rng.choice(COMPARISONS))
            elif kind in (4, 5):
                operator = str(rng.choice(AGGREGATES))
            groupby = str(rng.choice(schema.tags)) if kind == 5 else None
            out.append(QueryTemplate(tid, kind, fields, series, operator, groupby))
            tid += 1
    return out


def assign_patterns(
    templates: Sequence[QueryTemplate], patterns: Sequence[ArrivalPattern], seed: int = 0
) -> dict[int, ArrivalPattern]:
    """Pair every template with a uniformly drawn pattern."""
    if not patterns:
        raise ValueError("no arrival patterns to choose from")
    rng = np.random.default_rng(seed)
    return {t.template_id: patterns[int(rng.integers(len(patterns)))] for t in templates}


# generation ---------------------------------------------------------------


@dataclass(frozen=True)
class RangeModel:
    """How a query's accessed time range is drawn.

    ``t_end = issue_ts - Exp(recency_rate)`` and ``t_start = t_end - d`` with
    ``d`` drawn from ``durations`` (weights optional).
    """

    recency_rate: float = DEFAULT_RECENCY_RATE
    durations: tuple[int, ...] = DEFAULT_DURATIONS
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.recency_rate <= 0:
            raise ValueError("recency rate must be positive")
        if not self.durations or any(d < 0 for d in self.durations):
            raise ValueError("durations must be non-negative and non-empty")
        if self.weights is not None and len(self.weights) != len(self.durations):
            raise ValueError("one weight per duration")

    @classmethod
    def with_quantile(cls, fraction: float, within: float, **kw) -> RangeModel:
        """Recency rate such that ``fraction`` of ranges end within ``within`` seconds of issue."""
        return cls(recency_rate=-math.log(1.0 - fraction) / within, **kw)


def generate(
    templates: Sequence[QueryTemplate],
    pattern_assignment: Mapping[int, ArrivalPattern],
    horizon: int,
    data_time_domain: tuple[int, int],
    seed: int,
    start: int | None = None,
    interval: int = 300,
    ranges: RangeModel = RangeModel(),
) -> list[Query]:
    """Generate a query stream over ``[start, start + horizon)``.

    Each template emits ``arrival_count`` queries per interval with issue
    times uniform inside the interval.  Accessed ranges never extend past the
    issue time or outside ``data_time_domain``.  ``start`` defaults to the
    end of the data domain minus the horizon.
    """
    lo, hi = data_time_domain
    if hi <= lo:
        raise ValueError(f"empty data time domain {data_time_domain}")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    missing = [t.template_id for t in templates if t.template_id not in pattern_assignment]
    if missing:
        raise ValueError(f"templates without an arrival pattern: {missing}")
    if start is None:
        start = hi - horizon
    start -= start % interval
    dur = np.asarray(ranges.durations, dtype=np.int64)
    probs = None
    if ranges.weights is not None:
        w = np.asarray(ranges.weights, dtype=float)
        probs = w / w.sum()

    queries: list[Query] = []
    # one generator per template keeps streams independent of template order
    for tpl in templates:
        rng = np.random.default_rng([seed, tpl.template_id])
        pattern = pattern_assignment[tpl.template_id]
        for t0 in range(start, start + horizon, interval):
            n = arrival_count(pattern, (t0, t0 + interval), rng, unit=interval)
            if n == 0:
                continue
            issue = np.sort(rng.integers(t0, t0 + interval, size=n))
            ages = rng.exponential(1.0 / ranges.recency_rate, size=n)
            lengths = dur[rng.choice(len(dur), size=n, p=probs)]
            thresholds = rng.uniform(0.0, 100.0, size=n) if tpl.kind == 3 else None
            for j in range(n):
                ts = int(issue[j])
                t_end = min(ts - int(ages[j]), hi)
                t_end = max(t_end, lo)
                t_start = max(t_end - int(lengths[j]), lo)
                queries.append(
                    Query(
                        template_id=tpl.template_id,
                        kind=tpl.kind,
                        series=tpl.series,
                        issue_ts=ts,
                        t_start=t_start,
                        t_end=t_end,
                        fields=tpl.fields,
                        operator=tpl.operator,
                        threshold=None if thresholds is None else round(float(thresholds[j]), 3),
                    )
                )
    queries.sort(key=lambda q: (q.issue_ts, q.template_id, q.t_start, q.t_end))
    return queries


# line format --------------------------------------------------------------

WORKLOAD_HEADER = "issue_ts,template_id,kind,series_ids,t_start,t_end,op"


def format_query(q: Query) -> str:
    series = ";".join(str(s) for s in q.series)
    return f"{q.issue_ts},{q.template_id},{q.kind},{series},{q.t_start},{q.t_end},{q.operator or ''}"


def parse_query(line: str, templates: Mapping[int, QueryTemplate] | None = None) -> Query:
    parts = line.strip().split(",")
    if len(parts) != 7:
        raise ValueError(f"expected 7 columns, got {len(parts)}: {line!r}")
    issue, tid, kind, series, t_start, t_end, op = parts
    tid_i = int(tid)
    fields: tuple[str, ...] = ()
    if templates is not None and tid_i in templates:
        fields = templates[tid_i].fields
    return Query(
        template_id=tid_i,
        kind=int(kind),
        series=tuple(int(s) for s in series.split(";") if s),
        issue_ts=int(issue),
        t_start=int(t_start),
        t_end=int(t_end),
        fields=fields,
        operator=op or None,
    )


def write_workload(queries: Iterable[Query], path: str | Path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(WORKLOAD_HEADER + "\n")
        for q in queries:
            fh.write(format_query(q) + "\n")


def read_workload(path: str | Path, templates: Sequence[QueryTemplate] | None = None) -> list[Query]:
    by_id = None if templates is None else {t.template_id: t for t in templates}
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != WORKLOAD_HEADER:
            raise ValueError(f"unexpected workload header {header!r}")
        for line in fh:
            if line.strip():
                out.append(parse_query(line, by_id))
    return out


def per_interval_counts(
    queries: Iterable[Query], start: int, n_intervals: int, interval: int = 300, key=lambda q: q.template_id
) -> dict[object, np.ndarray]:
    """Count queries per (key, interval index) over ``n_intervals`` starting at ``start``."""
    out: dict[object, np.ndarray] = {}
    for q in queries:
        i = (q.issue_ts - start) // interval
        if 0 <= i < n_intervals:
            arr = out.setdefault(key(q), np.zeros(n_intervals, dtype=np.int64))
            arr[i] += 1
    return out
