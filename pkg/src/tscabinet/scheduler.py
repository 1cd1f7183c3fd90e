"""Tier placement of (series, time bucket) segments.

END always holds every segment (raw, or as a summary once over-cooled);
CLOUD and EDGE hold copies chosen by :func:`plan_migration`.  Placement is
kept as a bitmask grid so lookups and capacity accounting stay vectorised.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .temperature import TemperatureParams, TemperatureRecord, Thresholds, constant_heat_increment, heat_increment
from .workload import Query


class Tier(enum.IntFlag):
    CLOUD = 1
    EDGE = 2
    END = 4


CACHE_TIERS = (Tier.CLOUD, Tier.EDGE)


def tier_names(mask: int) -> str:
    names = [t.name for t in (Tier.CLOUD, Tier.EDGE, Tier.END) if mask & t]
    return "|".join(names) if names else "NONE"


class PlanningError(ValueError):
    pass


class ConflictError(RuntimeError):
    """A plan was applied to a placement that changed after planning."""


# summaries ----------------------------------------------------------------


@dataclass(frozen=True)
class DataSummary:
    series: int
    bucket: int
    count: int
    min: float
    max: float
    mean: float
    first: float
    last: float


def summarize_overcooled(points: Sequence[float], series: int = 0, bucket: int = 0) -> DataSummary:
    """Aggregate a segment's raw points (in time order)."""
    p = np.asarray(points, dtype=float)
    if p.size == 0:
        raise ValueError(f"segment ({series}, {bucket}) has no points to summarize")
    return DataSummary(
        series=series,
        bucket=bucket,
        count=int(p.size),
        min=float(p.min()),
        max=float(p.max()),
        mean=float(p.mean()),
        first=float(p[0]),
        last=float(p[-1]),
    )


# temperature prediction ---------------------------------------------------


def _heat(params: TemperatureParams, constant_heat: bool) -> float:
    if constant_heat:
        return constant_heat_increment(params.t_heat, 1, params.gamma)
    return heat_increment(params.t_heat, 1, params.window, params.gamma)


def predict_future_temperature(
    record: TemperatureRecord,
    predicted_accesses: Sequence[float],
    params: TemperatureParams,
    constant_heat: bool = False,
) -> list[float]:
    """Temperature after each of the coming windows given forecast access counts.

    Pending accesses already counted on the record are added to the first
    window.  An untracked record stays at zero until a window with predicted
    accesses ``s``; an actual access would restart it from the heat-source
    temperature, so the prediction restarts it from that temperature scaled
    by the chance of at least one access, ``1 - exp(-s)``.
    """
    s = [float(x) for x in predicted_accesses]
    if any(x < 0 for x in s):
        raise ValueError("predicted accesses must be non-negative")
    if s and record.tracked:
        s[0] += record.pending_accesses
    decay = math.exp(-params.k * params.window)
    heat = _heat(params, constant_heat)
    out = []
    temp = record.temperature if record.tracked else None
    for x in s:
        if temp is None:
            if x == 0:
                out.append(0.0)
                continue
            temp = params.t_heat * -math.expm1(-x)
        temp = temp * decay + heat * x
        out.append(temp)
    return out


def predicted_peak(
    current: np.ndarray,
    tracked: np.ndarray,
    pending: np.ndarray,
    accesses: np.ndarray,
    params: TemperatureParams,
    constant_heat: bool = False,
) -> np.ndarray:
    """Vectorised maximum of :func:`predict_future_temperature` over the horizon.

    ``accesses`` has shape ``current.shape + (H,)``.  Cells that stay
    untracked with no predicted access report 0.
    """
    decay = math.exp(-params.k * params.window)
    heat = _heat(params, constant_heat)
    temp = np.where(tracked, current, np.nan)
    peak = np.zeros(current.shape)
    for h in range(accesses.shape[-1]):
        s = accesses[..., h] + (pending if h == 0 else 0)
        restart = np.isnan(temp) & (s > 0)
        temp = np.where(restart, params.t_heat * -np.expm1(-s), temp)
        temp = temp * decay + heat * s
        peak = np.fmax(peak, temp)
    return peak


# placement ----------------------------------------------------------------


@dataclass
class Placement:
    """Which cache tiers hold each segment, with per-tier capacity in data points."""

    points: np.ndarray
    capacity: dict[Tier, int]
    tiers: np.ndarray = field(init=False)
    summarized: np.ndarray = field(init=False)
    occupancy: dict[Tier, int] = field(init=False)
    version: int = 0

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.int64)
        for t in CACHE_TIERS:
            if self.capacity.get(t, 0) < 0:
                raise ValueError(f"{t.name} capacity must be non-negative")
        self.capacity = {t: int(self.capacity.get(t, 0)) for t in CACHE_TIERS}
        self.tiers = np.zeros(self.points.shape, dtype=np.uint8)
        self.summarized = np.zeros(self.points.shape, dtype=bool)
        self.occupancy = {t: 0 for t in CACHE_TIERS}

    @property
    def shape(self) -> tuple[int, int]:
        return self.points.shape

    def resident(self) -> np.ndarray:
        return self.tiers != 0

    def recount(self) -> dict[Tier, int]:
        return {t: int(self.points[(self.tiers & t) != 0].sum()) for t in CACHE_TIERS}

    def free(self, tier: Tier) -> int:
        return self.capacity[tier] - self.occupancy[tier]


@dataclass(frozen=True)
class Action:
    series: int
    bucket: int
    tiers: int


@dataclass
class MigrationPlan:
    version: int
    preheat: list[Action] = field(default_factory=list)
    demote: list[Action] = field(default_factory=list)
    summarize: list[tuple[int, int]] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.preheat or self.demote or self.summarize)

    def preheated_points(self, placement: Placement) -> int:
        return int(sum(placement.points[a.series, a.bucket] for a in self.preheat))

    def log_lines(self, tick: int) -> list[str]:
        lines = [f"{tick},PREHEAT,{a.series},{a.bucket},{tier_names(a.tiers)}" for a in self.preheat]
        lines += [f"{tick},DEMOTE,{a.series},{a.bucket},{tier_names(a.tiers)}" for a in self.demote]
        lines += [f"{tick},SUMMARIZE,{s},{b},END" for s, b in self.summarize]
        return lines


def _fill(
    placement: Placement,
    order: np.ndarray,
    preheat_budget: int,
    summarize: Iterable[tuple[int, int]] = (),
) -> MigrationPlan:
    """Pack segments (flat indices, best first) into CLOUD/EDGE as a prefix of ``order``.

    Walking the ranking with a running point total ``P``: segments with
    ``P`` within the smaller tier go to both tiers, the next ones up to the
    larger tier go to that tier alone (EDGE on a tie), and packing stops
    there.  Non-resident segments spend preheat budget; once the budget is
    spent no further segment is admitted, while residents stay eligible.
    A resident is never copied to a tier it does not already occupy;
    residents left out of the packing are demoted.
    """
    n_bucket = placement.shape[1]
    flat_tiers = placement.tiers.ravel()
    p = placement.points.ravel()[order]
    cur = flat_tiers[order].astype(np.int64)
    new = cur == 0
    spent = np.cumsum(np.where(new, p, 0))
    include = ~new | (spent <= preheat_budget)
    total = np.cumsum(np.where(include, p, 0))
    cap_c, cap_e = placement.capacity[Tier.CLOUD], placement.capacity[Tier.EDGE]
    lo, hi = min(cap_c, cap_e), max(cap_c, cap_e)
    wide = int(Tier.EDGE) if cap_e >= cap_c else int(Tier.CLOUD)
    both = include & (total <= lo)
    single = include & (total > lo) & (total <= hi)
    assigned = np.where(both, int(Tier.CLOUD | Tier.EDGE), np.where(single, wide, 0))
    desired = np.where(new, assigned, assigned & cur)

    want = np.zeros(flat_tiers.shape, dtype=np.int64)
    want[order] = desired
    have = flat_tiers.astype(np.int64)
    add = want & ~have
    drop = have & ~want
    plan = MigrationPlan(placement.version)
    for idx in order[(add[order] != 0)].tolist():
        plan.preheat.append(Action(idx // n_bucket, idx % n_bucket, int(add[idx])))
    for idx in np.flatnonzero(drop).tolist():
        plan.demote.append(Action(idx // n_bucket, idx % n_bucket, int(drop[idx])))
    plan.summarize = sorted(set(summarize))
    return plan


def _check_feasible(placement: Placement, candidates: np.ndarray) -> None:
    enabled = [placement.capacity[t] for t in CACHE_TIERS if placement.capacity[t] > 0]
    if not enabled or candidates.size == 0:
        return
    pts = placement.points.ravel()[candidates]
    worst = int(np.argmax(pts))
    if pts[worst] > min(enabled):
        s, b = divmod(int(candidates[worst]), placement.shape[1])
        raise PlanningError(
            f"segment (series={s}, bucket={b}) holds {int(pts[worst])} points, "
            f"more than a tier can hold ({min(enabled)})"
        )


def plan_migration(
    placement: Placement,
    current: np.ndarray,
    thresholds: Thresholds,
    preheat_budget: int,
    predicted: np.ndarray | None = None,
    frequent: np.ndarray | None = None,
    counters: np.ndarray | None = None,
    overcooled: Iterable[tuple[int, int]] = (),
) -> MigrationPlan:
    """Choose the CLOUD/EDGE contents for the next window.

    ``current`` is the temperature grid (0 where untracked) and ``predicted``
    the predicted peak over the forecast horizon.  Segments at or above the
    hot threshold now are always eligible; segments that only the forecast
    makes hot must also lie in a frequent bucket (``frequent``, a boolean
    grid) unless they are already resident.  Eligible segments are ranked by
    predicted peak, then by frequent-bucket counter, then by lower series id
    and more recent bucket.
    """
    if preheat_budget < 0:
        raise ValueError("preheat budget must be non-negative")
    peak = current if predicted is None else np.fmax(current, predicted)
    eligible = current >= thresholds.hot
    if predicted is not None:
        forecast_hot = peak >= thresholds.hot
        if frequent is not None:
            forecast_hot &= frequent | placement.resident()
        eligible |= forecast_hot
    flat = np.flatnonzero(eligible)
    _check_feasible(placement, flat)
    series, bucket = np.divmod(flat, placement.shape[1])
    count = np.zeros(flat.size) if counters is None else counters.ravel()[flat]
    order = flat[np.lexsort((-bucket, series, -count, -peak.ravel()[flat]))]
    return _fill(placement, order, preheat_budget, overcooled)


def plan_by_recency(placement: Placement, last_access: np.ndarray, preheat_budget: int) -> MigrationPlan:
    """Most-recently-accessed-first packing, ignoring temperature (the LRU baseline)."""
    flat = np.flatnonzero(last_access >= 0)
    _check_feasible(placement, flat)
    series, bucket = np.divmod(flat, placement.shape[1])
    order = flat[np.lexsort((-bucket, series, -last_access.ravel()[flat]))]
    return _fill(placement, order, preheat_budget)


def _action_arrays(actions: Sequence[Action]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not actions:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e
    arr = np.array([(a.series, a.bucket, a.tiers) for a in actions], dtype=np.int64)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def apply_plan(placement: Placement, plan: MigrationPlan) -> Placement:
    """Apply every action of ``plan`` (demotions first) or none of them."""
    if plan.version != placement.version:
        raise ConflictError(f"plan built for placement v{plan.version}, placement is now v{placement.version}")
    tiers = placement.tiers.astype(np.int64)
    ds, db, dt = _action_arrays(plan.demote)
    np.bitwise_and.at(tiers, (ds, db), ~dt)
    ps, pb, pt = _action_arrays(plan.preheat)
    np.bitwise_or.at(tiers, (ps, pb), pt)
    occ = {t: int(placement.points[(tiers & int(t)) != 0].sum()) for t in CACHE_TIERS}
    for t in CACHE_TIERS:
        if occ[t] > placement.capacity[t]:
            raise PlanningError(f"plan overfills {t.name}: {occ[t]} > {placement.capacity[t]}")
    placement.tiers = tiers.astype(np.uint8)
    placement.occupancy = occ
    for s, b in plan.summarize:
        placement.summarized[s, b] = True
    if not plan.is_empty():
        placement.version += 1
    return placement


# lookup -------------------------------------------------------------------


@dataclass(frozen=True)
class LookupResult:
    hit: bool
    tier: Tier
    summarized: bool = False


def query_segments(query: Query, bucket_len: int, n_buckets: int, origin: int = 0) -> tuple[int, int]:
    """Inclusive grid-column range a query touches on each of its series.

    ``origin`` is the absolute bucket index of grid column 0; the range is
    clipped to the grid.
    """
    b0 = max(0, query.t_start // bucket_len - origin)
    b1 = min(n_buckets - 1, query.t_end // bucket_len - origin)
    return b0, b1


def lookup(placement: Placement, query: Query, bucket_len: int = 300, origin: int = 0) -> LookupResult:
    """All-or-nothing: a hit needs every touched segment on CLOUD or EDGE."""
    b0, b1 = query_segments(query, bucket_len, placement.shape[1], origin)
    if b1 < b0:
        return LookupResult(False, Tier.END)
    rows = list(query.series)
    block = placement.tiers[rows, b0 : b1 + 1]
    if placement.summarized[rows, b0 : b1 + 1].any():
        return LookupResult(False, Tier.END, summarized=True)
    if (block & Tier.CLOUD).all():
        return LookupResult(True, Tier.CLOUD)
    if (block != 0).all():
        return LookupResult(True, Tier.EDGE)
    return LookupResult(False, Tier.END)


def occupancy_from_actions(before: Mapping[Tier, int], plan: MigrationPlan, placement: Placement) -> dict[Tier, int]:
    """Expected occupancy after ``plan``: before + preheated points - demoted points."""
    out = dict(before)
    for a in plan.preheat:
        for t in CACHE_TIERS:
            if a.tiers & t:
                out[t] += int(placement.points[a.series, a.bucket])
    for a in plan.demote:
        for t in CACHE_TIERS:
            if a.tiers & t:
                out[t] -= int(placement.points[a.series, a.bucket])
    return out
