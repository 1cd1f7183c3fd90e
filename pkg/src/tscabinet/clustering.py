"""Query template extraction and online clustering of templates by arrival history.

Templates are compared by the DTW distance between their recent per-interval
arrival counts.  A cluster is anchored on the history of its founding
template; new templates join the nearest cluster whose center is closer
than ``rho``, otherwise they found a new one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .workload import MULTI_SERIES_KINDS, Query

DEFAULT_RHO = 10.0
DEFAULT_TIMEOUT = 24 * 3600
DEFAULT_RECHECK_WINDOW = 64


@dataclass(frozen=True)
class CanonicalTemplate:
    """A query with its time bounds and aggregation stripped.

    ``predicate`` is the (field, comparison) filter of kind-3 queries; the
    threshold value is a placeholder just like the time bounds.
    """

    multi_series: bool
    fields: tuple[str, ...]
    series: tuple[int, ...]
    predicate: tuple[str, str] | None = None

    def render(self) -> str:
        cols = ", ".join(self.fields) or "*"
        if self.multi_series:
            where = "series IN {" + ", ".join(map(str, self.series)) + "}"
        else:
            where = f"series = {self.series[0]}"
        sql = f"SELECT {cols} WHERE {where} AND time >= ? AND time <= ?"
        if self.predicate:
            sql += f" AND {self.predicate[0]} {self.predicate[1]} ?"
        return sql


@dataclass(frozen=True)
class ExtractedTemplate:
    canonical: CanonicalTemplate
    record: tuple[int, int]


def canonical_form(query: Query) -> CanonicalTemplate:
    predicate = None
    if query.kind == 3:
        predicate = (query.fields[0] if query.fields else "?", query.operator or "?")
    return CanonicalTemplate(
        multi_series=query.kind in MULTI_SERIES_KINDS,
        fields=tuple(query.fields),
        series=tuple(query.series),
        predicate=predicate,
    )


def extract_template(query: Query, now: int) -> ExtractedTemplate:
    """Canonical form plus the relative record ``(now - t_end, now - t_start)``."""
    if now < query.t_end:
        raise ValueError(f"query range ends after now ({query.t_end} > {now})")
    return ExtractedTemplate(canonical_form(query), (now - query.t_end, now - query.t_start))


def dtw_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Dynamic time warping with |x - y| local cost and match/insert/delete steps.

    Plain Python rows: the inputs are short arrival histories, where numpy's
    per-call overhead outweighs its vectorisation.
    """
    x = [float(v) for v in a]
    y = [float(v) for v in b]
    if not x or not y:
        raise ValueError("DTW needs two non-empty sequences")
    inf = math.inf
    prev = [0.0] + [inf] * len(y)
    for xi in x:
        cur = [inf]
        left = inf
        for j, yj in enumerate(y):
            best = prev[j] if prev[j] < prev[j + 1] else prev[j + 1]
            if left < best:
                best = left
            left = abs(xi - yj) + best
            cur.append(left)
        prev = cur
    return prev[-1]


@dataclass
class ArrivalHistory:
    interval_len: int
    counts: list[int] = field(default_factory=list)

    def append(self, count: int) -> None:
        if count < 0:
            raise ValueError("arrival counts are non-negative")
        self.counts.append(int(count))

    def recent(self, w: int) -> list[int]:
        return self.counts[-w:] if w else list(self.counts)


@dataclass
class Cluster:
    id: int
    center: int
    members: set[int]
    last_received: int


@dataclass
class ClusterSet:
    """Clusters plus the arrival histories of every template ever seen."""

    histories: dict[int, ArrivalHistory] = field(default_factory=dict)
    clusters: dict[int, Cluster] = field(default_factory=dict)
    recheck_window: int = DEFAULT_RECHECK_WINDOW
    next_id: int = 0

    def cluster_of(self, template_id: int) -> int | None:
        for c in self.clusters.values():
            if template_id in c.members:
                return c.id
        return None

    def distance(self, t1: int, t2: int) -> float:
        w = self.recheck_window
        return dtw_distance(self.histories[t1].recent(w) or [0], self.histories[t2].recent(w) or [0])


def _distance_to(clusters: ClusterSet, history: ArrivalHistory, center: int) -> float:
    w = clusters.recheck_window
    return dtw_distance(history.recent(w) or [0], clusters.histories[center].recent(w) or [0])


def assign(
    template_id: int,
    history: ArrivalHistory,
    clusters: ClusterSet,
    rho: float,
    now: int = 0,
    exclude: Iterable[int] = (),
) -> int:
    """Place a template in the nearest cluster closer than ``rho`` or found a new one.

    Ties on the minimal distance go to the lowest cluster id.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    clusters.histories[template_id] = history
    skip = set(exclude)
    best_id, best_d = None, np.inf
    for cid in sorted(clusters.clusters):
        if cid in skip:
            continue
        d = _distance_to(clusters, history, clusters.clusters[cid].center)
        if d < best_d:
            best_id, best_d = cid, d
    if best_id is not None and best_d < rho:
        c = clusters.clusters[best_id]
        c.members.add(template_id)
        c.last_received = max(c.last_received, now)
        return best_id
    cid = clusters.next_id
    clusters.next_id += 1
    clusters.clusters[cid] = Cluster(cid, template_id, {template_id}, now)
    return cid


def _medoid(clusters: ClusterSet, members: Iterable[int]) -> int:
    ms = sorted(members)
    return min(ms, key=lambda t: (sum(clusters.distance(t, o) for o in ms if o != t), t))


def rebalance(clusters: ClusterSet, rho: float, now: int | None = None) -> ClusterSet:
    """One re-check pass: members no longer within ``rho`` of their center are re-assigned.

    If most of a cluster's members have drifted away from the center, the
    center template is the one that moved: the remaining member with the
    smallest summed distance to the others becomes the new center and the
    old center is re-assigned instead.
    """
    for cid in sorted(clusters.clusters):
        c = clusters.clusters.get(cid)
        if c is None:
            continue
        stamp = c.last_received if now is None else now
        others = sorted(c.members - {c.center})
        far = [t for t in others if clusters.distance(t, c.center) >= rho]
        if others and 2 * len(far) > len(others):
            old = c.center
            c.members.discard(old)
            c.center = _medoid(clusters, c.members)
            assign(old, clusters.histories[old], clusters, rho, stamp, exclude=(cid,))
            far = [t for t in sorted(c.members - {c.center}) if clusters.distance(t, c.center) >= rho]
        for t in far:
            c.members.discard(t)
            assign(t, clusters.histories[t], clusters, rho, stamp, exclude=(cid,))
    return clusters


def evict_stale(clusters: ClusterSet, timeout: int, now: int) -> ClusterSet:
    """Delete clusters that received nothing for longer than ``timeout``; histories are kept."""
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    for cid in sorted(clusters.clusters):
        if clusters.clusters[cid].last_received < now - timeout:
            del clusters.clusters[cid]
    return clusters


def cluster_arrival_series(cluster: Cluster, histories: Mapping[int, ArrivalHistory]) -> ArrivalHistory:
    """Element-wise sum of the member histories, aligned by interval index."""
    if not cluster.members:
        raise ValueError(f"cluster {cluster.id} is empty")
    members = [histories[t] for t in sorted(cluster.members)]
    lens = {h.interval_len for h in members}
    if len(lens) != 1:
        raise ValueError(f"members of cluster {cluster.id} use different interval lengths: {sorted(lens)}")
    n = max(len(h.counts) for h in members)
    total = np.zeros(n, dtype=np.int64)
    for h in members:
        total[: len(h.counts)] += np.asarray(h.counts, dtype=np.int64)
    return ArrivalHistory(lens.pop(), total.tolist())


def dump_clusters(clusters: ClusterSet, last: int = 32) -> str:
    """Text dump: one line per cluster with its center, members and last arrival counts."""
    lines = []
    for cid in sorted(clusters.clusters):
        c = clusters.clusters[cid]
        series = cluster_arrival_series(c, clusters.histories).counts[-last:]
        lines.append(
            f"cluster={cid} center={c.center} members={';'.join(map(str, sorted(c.members)))} "
            f"counts={' '.join(map(str, series))}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


class TemplateClusterer:
    """Online driver: extracts templates from each interval's queries and keeps clusters current.

    Every known template gets one count appended per closed interval (zero
    when silent), so histories stay index-aligned from the first interval on.
    """

    def __init__(
        self,
        interval: int = 300,
        rho: float = DEFAULT_RHO,
        timeout: int = DEFAULT_TIMEOUT,
        recheck_every: int = 12,
        recheck_window: int = DEFAULT_RECHECK_WINDOW,
    ):
        self.interval = interval
        self.rho = rho
        self.timeout = timeout
        self.recheck_every = recheck_every
        self.state = ClusterSet(recheck_window=recheck_window)
        self.template_ids: dict[CanonicalTemplate, int] = {}
        self.canonical: dict[int, CanonicalTemplate] = {}
        self.n_intervals = 0
        self._pending: dict[int, int] = {}

    def template_id(self, query: Query) -> int:
        form = canonical_form(query)
        tid = self.template_ids.get(form)
        if tid is None:
            tid = len(self.template_ids)
            self.template_ids[form] = tid
            self.canonical[tid] = form
        return tid

    def observe(self, query: Query) -> int:
        tid = self.template_id(query)
        self._pending[tid] = self._pending.get(tid, 0) + 1
        return tid

    def close_interval(self, now: int) -> None:
        for tid in self.canonical:
            h = self.state.histories.get(tid)
            if h is None:
                h = ArrivalHistory(self.interval, [0] * self.n_intervals)
                self.state.histories[tid] = h
            h.append(self._pending.get(tid, 0))
        self.n_intervals += 1
        for tid in sorted(self._pending):
            cid = self.state.cluster_of(tid)
            if cid is None:
                assign(tid, self.state.histories[tid], self.state, self.rho, now)
            else:
                c = self.state.clusters[cid]
                c.last_received = max(c.last_received, now)
        self._pending = {}
        if self.n_intervals % self.recheck_every == 0:
            rebalance(self.state, self.rho, now)
            evict_stale(self.state, self.timeout, now)

    def clusters(self) -> list[Cluster]:
        return [self.state.clusters[c] for c in sorted(self.state.clusters)]

    def series(self, cluster: Cluster) -> np.ndarray:
        return np.asarray(cluster_arrival_series(cluster, self.state.histories).counts, dtype=float)
