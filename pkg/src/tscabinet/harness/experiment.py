"""Tick-by-tick replay of a workload against one placement policy.

Each tick is one temperature window.  Queries issued inside the window are
looked up (and counted once the warm-up is over), then recorded as
accesses.  At the window boundary the temperature records are updated, the
next bucket's fresh data gets its record, and the policy plans and applies
the CLOUD/EDGE contents for the coming window.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import frequent as freq
from ..clustering import TemplateClusterer
from ..forecasting import ensemble as ens
from ..forecasting.evaluation import metric_rows, naive_forecast, rolling_origin
from ..scheduler import (
    Placement,
    Tier,
    apply_plan,
    lookup,
    plan_by_recency,
    plan_migration,
    predicted_peak,
    query_segments,
)
from ..temperature import TemperatureParams, TemperatureTable, Thresholds
from ..workload import (
    DAY,
    Chaos,
    Cycles,
    Query,
    QueryTemplate,
    RangeModel,
    Spike,
    Stability,
    assign_patterns,
    build_template_summary,
    generate,
    read_workload,
)
from .config import ExperimentConfig
from .dataset import SeriesStore, ingest_csv, synthetic_store

log = logging.getLogger(__name__)

TEMPERATURE_POLICIES = ("TSCABINET", "TSCABINET_NO_FORECAST", "TITLE")


class SimulationError(RuntimeError):
    def __init__(self, tick: int, cause: BaseException):
        super().__init__(f"tick {tick}: {type(cause).__name__}: {cause}")
        self.tick = tick


@dataclass
class CallCounter:
    """How often a policy reached into the forecasting and frequent-timestamp code."""

    forecasting: int = 0
    frequent: int = 0


@dataclass
class PolicyResult:
    policy: str
    capacity: int
    queries: int = 0
    hits: int = 0
    summarized_misses: int = 0
    served_cloud: int = 0
    served_edge: int = 0
    preheat_actions: int = 0
    demote_actions: int = 0
    summarize_actions: int = 0
    preheated_points: int = 0
    occupancy: list[tuple[int, int, int]] = field(default_factory=list)
    calls: CallCounter = field(default_factory=CallCounter)
    plan_log: list[str] = field(default_factory=list)
    forecast_metrics: list[tuple] = field(default_factory=list)
    runtime: float = 0.0

    @property
    def misses(self) -> int:
        return self.queries - self.hits

    @property
    def hit_rate(self) -> float:
        return self.hits / self.queries if self.queries else 0.0


@dataclass
class ExperimentReport:
    seed: int
    results: list[PolicyResult] = field(default_factory=list)
    forecast_metrics: list[tuple] = field(default_factory=list)
    runtime: float = 0.0

    def result(self, policy: str, capacity: int | None = None) -> PolicyResult:
        for r in self.results:
            if r.policy == policy and (capacity is None or r.capacity == capacity):
                return r
        raise KeyError((policy, capacity))


# setup --------------------------------------------------------------------


def load_store(cfg: ExperimentConfig) -> SeriesStore:
    if cfg.dataset:
        return ingest_csv(cfg.dataset)
    return synthetic_store(cfg.dataset_series, cfg.dataset_days, cfg.dataset_step, seed=cfg.seed)


def workload_patterns(cfg: ExperimentConfig, templates: Sequence[QueryTemplate], horizon_start: int) -> dict:
    """Daily peaks staggered across templates, or a seeded mix of all four pattern kinds."""
    rng = np.random.default_rng([cfg.seed, 17])
    n = len(templates)
    cycles = {}
    for i, t in enumerate(templates):
        offset = int((i * DAY // n + int(rng.integers(0, 4)) * 900) % DAY)
        cycles[t.template_id] = Cycles(DAY, ((offset, cfg.peak_width, cfg.peak_rate),), cfg.base_rate)
    if cfg.patterns == "cycles":
        return cycles
    others = [
        Stability(max(cfg.base_rate, 1.0)),
        Spike(horizon_start + DAY, cfg.peak_rate, 1.0 / 7200),
        Chaos(cfg.seed, cfg.peak_rate / 2),
    ]
    chosen = assign_patterns(templates, [None, *others], seed=cfg.seed)
    return {tid: cycles[tid] if p is None else p for tid, p in chosen.items()}


@dataclass
class Scenario:
    """Everything shared by the policies of one experiment."""

    cfg: ExperimentConfig
    store: SeriesStore
    first_bucket: int
    points: np.ndarray
    queries: list[Query]
    start: int
    measure_start: int
    end: int

    @property
    def total_points(self) -> int:
        return int(self.points.sum())

    def default_capacity(self) -> int:
        cfg = self.cfg
        return cfg.capacity if cfg.capacity is not None else int(cfg.capacity_fraction * self.total_points)


def build_scenario(cfg: ExperimentConfig, store: SeriesStore | None = None) -> Scenario:
    store = store or load_store(cfg)
    w = cfg.window
    first, points = store.grid(w)
    data_end = store.end + 1
    end = (data_end // w) * w
    span = int(round((cfg.warmup_days + cfg.measure_days) * DAY / w)) * w
    start = max(end - span, first * w)
    measure_start = end - int(round(cfg.measure_days * DAY / w)) * w
    if cfg.workload:
        queries = [q for q in read_workload(cfg.workload) if start <= q.issue_ts < end]
    else:
        templates = build_template_summary(store.schema, seed=cfg.seed, per_kind=cfg.templates_per_kind)
        ranges = RangeModel.with_quantile(cfg.recency_fraction, cfg.recency_within, durations=cfg.duration_list())
        queries = generate(
            templates,
            workload_patterns(cfg, templates, start),
            horizon=end - start,
            data_time_domain=(store.start, data_end - 1),
            seed=cfg.seed,
            start=start,
            interval=w,
            ranges=ranges,
        )
    bad = [q for q in queries if any(s >= store.n_series for s in q.series)]
    if bad:
        raise ValueError(f"query references series {max(max(q.series) for q in bad)} beyond the dataset")
    return Scenario(cfg, store, first, points, queries, start, measure_start, end)


# per-policy simulation ----------------------------------------------------


class Forecaster:
    """Per-cluster arrival forecasts and per-template query-age summaries for preheating."""

    def __init__(self, cfg: ExperimentConfig, calls: CallCounter):
        self.cfg = cfg
        self.calls = calls
        self.clusterer = TemplateClusterer(cfg.window, cfg.cluster_rho, cfg.cluster_timeout)
        self.tables: dict[int, freq.CounterTable] = {}
        self.mined: dict[int, int] = {}
        self.series: dict[int, tuple[int, ...]] = {}
        self.models: dict[int, ens.EnsembleModel | None] = {}
        self.ticks = 0

    def observe(self, q: Query) -> None:
        tid = self.clusterer.observe(q)
        self.series[tid] = q.series
        table = self.tables.setdefault(tid, freq.CounterTable(self.cfg.freq_k))
        freq.mg_extend(table, freq.expand_range(q.issue_ts - q.t_end, q.issue_ts - q.t_start, self.cfg.freq_bucket))
        self.mined[tid] = self.mined.get(tid, 0) + 1
        self.calls.frequent += 1

    def _fit(self, y: np.ndarray) -> ens.EnsembleModel | None:
        cfg = self.cfg
        if y.size < 64:
            return None
        self.calls.forecasting += 1
        return ens.fit_ensemble(
            y,
            lag=cfg.forecast_lag,
            hidden=cfg.forecast_hidden,
            epochs=cfg.forecast_epochs,
            learning_rate=cfg.forecast_lr,
            seed=cfg.seed,
            max_windows=cfg.forecast_windows,
        )

    def close_interval(self, now: int) -> dict[int, np.ndarray]:
        """Close the window ending at ``now`` and forecast every cluster's next windows."""
        cfg = self.cfg
        self.clusterer.close_interval(now)
        self.ticks += 1
        refit = self.ticks % cfg.forecast_refit == 0
        out = {}
        for c in self.clusterer.clusters():
            y = self.clusterer.series(c)
            if refit or c.id not in self.models:
                self.models[c.id] = self._fit(y)
            model = self.models[c.id]
            self.calls.forecasting += 1
            if model is None or y.size < model.linear.lag:
                out[c.id] = naive_forecast(y, cfg.forecast_horizon)
            else:
                out[c.id] = ens.ensemble_predict(model, y, cfg.forecast_horizon)
        return out

    def age_counters(self, tid: int) -> np.ndarray:
        """Misra-Gries counters of a template indexed by age bucket, with a trailing zero."""
        table = self.tables[tid]
        out = np.zeros(max(table.entries, default=-1) + 2)
        for a, c in table.entries.items():
            out[a] = c
        return out

    def expected_accesses(
        self, forecasts: dict[int, np.ndarray], now_bucket: int, n_series: int, n_buckets: int, window: int
    ) -> tuple[int, np.ndarray, np.ndarray]:
        """Predicted accesses per segment for each coming window over the recent part of the grid.

        Returns ``(lo, accesses, counters)`` where ``accesses[s, b - lo, h]``
        covers window ``h`` and ``counters`` sums the age-bucket counters
        behind each segment (for tie-breaking).
        """
        cfg = self.cfg
        horizon = cfg.forecast_horizon
        per_bucket = max(1, cfg.freq_bucket // window)
        counts = {tid: self.age_counters(tid) for tid in self.tables}
        depth = max((c.size for c in counts.values()), default=0) * per_bucket + horizon
        lo = max(0, now_bucket - depth)
        cols = np.arange(lo, min(n_buckets, now_bucket + horizon))
        acc = np.zeros((n_series, cols.size, horizon))
        counters = np.zeros((n_series, cols.size))
        for c in self.clusterer.clusters():
            fc = forecasts.get(c.id)
            if fc is None:
                continue
            members = sorted(c.members)
            recent = np.array([sum(self.clusterer.state.histories[t].recent(DAY // window)) for t in members], float)
            if recent.sum() == 0:
                continue
            share = recent / recent.sum()
            for t, sh in zip(members, share):
                cnt = counts.get(t)
                if cnt is None or cnt.size == 1 or sh == 0:
                    continue
                # fraction of the template's queries reaching each age bucket (a lower bound)
                cover = cnt / self.mined[t]
                rows = list(self.series[t])
                for h in range(horizon):
                    a = _age_index((now_bucket + h - cols) * window, cfg.freq_bucket, cnt.size)
                    acc[rows, :, h] += fc[h] * sh * cover[a]
                counters[rows, :] += cnt[_age_index((now_bucket - cols) * window, cfg.freq_bucket, cnt.size)]
        return lo, acc, counters

    def evaluate(self, horizons: Sequence[int]) -> list[tuple]:
        """Rolling-origin scores of each cluster's ensemble on its last day, against the cluster series."""
        rows = []
        longest = max(horizons)
        for c in self.clusterer.clusters():
            y = self.clusterer.series(c)
            first = y.size - DAY // self.cfg.window
            if first < 2 * self.cfg.forecast_lag or y.size - first < longest:
                continue
            model = self._fit(y[:first])
            if model is None:
                continue
            scores = rolling_origin(y, lambda h, s: ens.ensemble_predict(model, h, s), first, horizons, stride=12)
            rows.extend(metric_rows(c.id, scores))
        return rows


def _age_index(age: np.ndarray, bucket: int, size: int) -> np.ndarray:
    """Age-bucket index into a counter array of ``size`` whose last slot is zero."""
    a = np.where(age >= 0, age // bucket, size - 1)
    return np.minimum(a, size - 1)


def _capacities(total: int, edge_fraction: float) -> dict[Tier, int]:
    edge = int(round(total * edge_fraction))
    return {Tier.CLOUD: total - edge, Tier.EDGE: edge}


def simulate(
    scn: Scenario, policy: str, capacity: int, keep_log: bool = True, evaluate_forecasts: bool = False
) -> PolicyResult:
    cfg = scn.cfg
    w = cfg.window
    n_series, n_buckets = scn.points.shape
    params = TemperatureParams(k=cfg.temp_k, gamma=cfg.temp_gamma, t_heat=cfg.temp_t_heat, window=w)
    defaults = Thresholds.default_for(params)
    thresholds = Thresholds(
        hot=defaults.hot if cfg.theta_hot is None else cfg.theta_hot,
        overcooled=defaults.overcooled if cfg.theta_overcooled is None else cfg.theta_overcooled,
    )
    result = PolicyResult(policy, capacity)
    placement = Placement(scn.points, _capacities(capacity, cfg.edge_fraction))
    uses_temperature = policy in TEMPERATURE_POLICIES
    table = TemperatureTable(scn.points.shape, params, thresholds, constant_heat=policy == "TITLE")
    last_access = np.full(scn.points.shape, -1, dtype=np.int64) if policy == "LRU" else None
    forecaster = Forecaster(cfg, result.calls) if policy == "TSCABINET" else None

    def bucket_of(t: int) -> int:
        return t // w - scn.first_bucket

    if uses_temperature:
        table.init((slice(None), bucket_of(scn.start)), scn.start)
    queries = scn.queries
    qi = 0
    t0 = time.perf_counter()
    tick = 0
    for tick_start in range(scn.start, scn.end, w):
        try:
            boundary = tick_start + w
            while qi < len(queries) and queries[qi].issue_ts < boundary:
                q = queries[qi]
                qi += 1
                res = lookup(placement, q, w, scn.first_bucket)
                if q.issue_ts >= scn.measure_start:
                    result.queries += 1
                    if res.hit:
                        result.hits += 1
                        if res.tier == Tier.CLOUD:
                            result.served_cloud += 1
                        else:
                            result.served_edge += 1
                    elif res.summarized:
                        result.summarized_misses += 1
                b0, b1 = query_segments(q, w, n_buckets, scn.first_bucket)
                if b1 < b0:
                    continue
                if uses_temperature:
                    for s in q.series:
                        table.access(s, b0, b1, tick_start)
                if last_access is not None:
                    last_access[list(q.series), b0 : b1 + 1] = q.issue_ts
                if forecaster is not None:
                    forecaster.observe(q)

            overcooled: list[tuple[int, int]] = []
            if uses_temperature:
                dropped = table.tick(boundary)
                nb = bucket_of(boundary)
                if nb < n_buckets:
                    table.init((slice(None), nb), boundary)
                old_enough = nb - cfg.summary_min_age // w
                if old_enough > 0 and dropped[:, :old_enough].any():
                    ss, bb = np.nonzero(dropped[:, :old_enough])
                    overcooled = [
                        (int(s), int(b)) for s, b in zip(ss, bb) if scn.points[s, b] > 0 and not placement.summarized[s, b]
                    ]

            if policy == "LRU":
                plan = plan_by_recency(placement, last_access, cfg.preheat_budget)
            else:
                current = table.current()
                predicted = frequent = counters = None
                if forecaster is not None:
                    forecasts = forecaster.close_interval(boundary)
                    nb = min(bucket_of(boundary), n_buckets - 1)
                    lo, acc, cnt = forecaster.expected_accesses(forecasts, nb, n_series, n_buckets, w)
                    hi = lo + acc.shape[1]
                    predicted = np.zeros(current.shape)
                    predicted[:, lo:hi] = predicted_peak(
                        current[:, lo:hi], table.tracked[:, lo:hi], table.pending[:, lo:hi], acc, params
                    )
                    counters = np.zeros(current.shape)
                    counters[:, lo:hi] = cnt
                    frequent = counters > 0
                plan = plan_migration(
                    placement,
                    current,
                    thresholds,
                    cfg.preheat_budget,
                    predicted=predicted,
                    frequent=frequent,
                    counters=counters,
                    overcooled=overcooled,
                )
            for s, b in plan.summarize:
                scn.store.summarize(s, b + scn.first_bucket, w)
            result.preheat_actions += len(plan.preheat)
            result.demote_actions += len(plan.demote)
            result.summarize_actions += len(plan.summarize)
            result.preheated_points += plan.preheated_points(placement)
            if keep_log:
                result.plan_log.extend(plan.log_lines(tick))
            apply_plan(placement, plan)
            if tick % (3600 // w or 1) == 0:
                result.occupancy.append(
                    (tick, placement.occupancy[Tier.CLOUD], placement.occupancy[Tier.EDGE])
                )
        except Exception as e:  # noqa: BLE001 - re-raised with the tick attached
            raise SimulationError(tick, e) from e
        tick += 1
    if forecaster is not None and evaluate_forecasts:
        result.forecast_metrics = forecaster.evaluate(cfg.eval_horizons())
    result.runtime = time.perf_counter() - t0
    return result


def run_experiment(
    cfg: ExperimentConfig,
    scenario: Scenario | None = None,
    capacity: int | None = None,
    keep_log: bool = True,
    evaluate_forecasts: bool = True,
) -> ExperimentReport:
    t0 = time.perf_counter()
    scn = scenario or build_scenario(cfg)
    cap = scn.default_capacity() if capacity is None else capacity
    report = ExperimentReport(cfg.seed)
    for policy in cfg.policy_list():
        res = simulate(scn, policy, cap, keep_log, evaluate_forecasts)
        report.forecast_metrics.extend(res.forecast_metrics)
        report.results.append(res)
        log.info("%s capacity=%d hit_rate=%.4f (%.1fs)", policy, cap, res.hit_rate, res.runtime)
    report.runtime = time.perf_counter() - t0
    return report


def _sweep_point(args: tuple) -> ExperimentReport:
    cfg, scn, capacity, evaluate = args
    return run_experiment(cfg, scn, capacity, keep_log=False, evaluate_forecasts=evaluate)


def sweep(
    cfg: ExperimentConfig,
    capacities: Sequence[int],
    scenario: Scenario | None = None,
    workers: int = 1,
) -> list[ExperimentReport]:
    """One report per capacity, all on the same scenario and seed.

    With ``workers > 1`` capacities run in separate processes; each run
    owns its state, so the reports are the same as a sequential sweep.
    """
    caps = list(capacities)
    if not caps:
        raise ValueError("no capacities to sweep")
    if any(b <= a for a, b in zip(caps, caps[1:])):
        raise ValueError(f"capacities must be strictly increasing: {caps}")
    scn = scenario or build_scenario(cfg)
    jobs = [(cfg, scn, c, i == 0) for i, c in enumerate(caps)]
    if workers <= 1 or len(jobs) == 1:
        return [_sweep_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_sweep_point, jobs))
