from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tscabinet.clustering import (
    ArrivalHistory,
    Cluster,
    ClusterSet,
    TemplateClusterer,
    assign,
    canonical_form,
    cluster_arrival_series,
    dtw_distance,
    dump_clusters,
    evict_stale,
    extract_template,
    rebalance,
)
from tscabinet.workload import Query, per_interval_counts

from oracles import dtw_brute


def q(kind=1, series=(0,), fields=("ozone",), t_start=0, t_end=100, issue=200, op=None):
    return Query(0, kind, series, issue, t_start, t_end, fields, op)


def h(*counts) -> ArrivalHistory:
    return ArrivalHistory(300, list(counts))


# template extraction --------------------------------------------------------------


def test_aggregate_is_stripped():
    assert canonical_form(q(kind=4, op="AVG", t_start=5, t_end=50)) == canonical_form(q(kind=1))


def test_time_bounds_are_placeholders():
    a, b = q(t_start=0, t_end=100), q(t_start=300, t_end=900, issue=1000)
    assert canonical_form(a) == canonical_form(b)
    assert extract_template(a, 200).record != extract_template(b, 1000).record


def test_record_is_relative_to_now():
    assert extract_template(q(t_start=40, t_end=100), 100).record == (0, 60)
    with pytest.raises(ValueError):
        extract_template(q(t_end=100), 99)


def test_distinct_series_give_distinct_forms():
    assert canonical_form(q(series=(0,))) != canonical_form(q(series=(1,)))
    assert "series IN {1, 2}" in canonical_form(q(kind=2, series=(1, 2))).render()


# DTW ------------------------------------------------------------------------


def test_dtw_examples():
    assert dtw_distance([0, 1, 2], [0, 1, 2]) == 0
    assert dtw_distance([7], [3]) == 4
    assert dtw_distance([1, 3], [1, 2, 3]) == 1


def test_dtw_rejects_empty():
    with pytest.raises(ValueError):
        dtw_distance([], [1])


@given(st.lists(st.integers(0, 5), min_size=1, max_size=7), st.lists(st.integers(0, 5), min_size=1, max_size=7))
def test_dtw_matches_path_enumeration(a, b):
    assert dtw_distance(a, b) == dtw_brute(a, b)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=8), st.lists(st.floats(-100, 100), min_size=1, max_size=8))
def test_dtw_is_symmetric_and_non_negative(a, b):
    d = dtw_distance(a, b)
    assert d >= 0
    assert d == pytest.approx(dtw_distance(b, a))


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=8))
def test_dtw_self_distance_is_zero(a):
    assert dtw_distance(a, a) == 0


# assignment -----------------------------------------------------------------


def test_first_template_founds_cluster():
    cs = ClusterSet()
    assert assign(0, h(1, 2, 3), cs, rho=1.0) == 0
    assert cs.clusters[0].members == {0}


def test_identical_history_joins():
    cs = ClusterSet()
    assign(0, h(1, 2, 3), cs, rho=0.5)
    assert assign(1, h(1, 2, 3), cs, rho=0.5) == 0


def test_far_template_founds_new_cluster():
    cs = ClusterSet()
    assign(0, h(5), cs, rho=3)
    assign(1, h(9), cs, rho=3)
    # distances 5 and 9 from the two centers, both over rho
    assert assign(2, h(0), cs, rho=3) == 2
    assert len(cs.clusters) == 3


def test_assign_picks_nearest():
    cs = ClusterSet()
    assign(0, h(0), cs, rho=100)
    assign(1, h(50), cs, rho=10)
    assert assign(2, h(48), cs, rho=10) == 1


def test_rho_must_be_positive():
    with pytest.raises(ValueError):
        assign(0, h(1), ClusterSet(), rho=0)


def _two_members(center_counts, member_counts):
    cs = ClusterSet()
    assign(0, h(*center_counts), cs, rho=5)
    assign(1, h(*member_counts), cs, rho=5)
    return cs


def test_rebalance_no_op_when_members_close():
    cs = _two_members([1, 1, 1], [1, 1, 2])
    before = {c: (v.center, set(v.members)) for c, v in cs.clusters.items()}
    rebalance(cs, rho=5)
    assert {c: (v.center, set(v.members)) for c, v in cs.clusters.items()} == before


def test_rebalance_moves_drifted_member():
    cs = ClusterSet()
    for tid in range(3):
        assign(tid, h(1, 1, 1), cs, rho=5)
    cs.histories[2].counts[:] = [40, 40, 40]
    rebalance(cs, rho=5)
    assert cs.cluster_of(2) != cs.cluster_of(0)
    assert cs.clusters[cs.cluster_of(0)].members == {0, 1}


def test_rebalance_recenters_when_center_drifts():
    cs = ClusterSet()
    for tid in range(4):
        assign(tid, h(1, 1, 1), cs, rho=5)
    cs.histories[0].counts[:] = [40, 40, 40]
    rebalance(cs, rho=5)
    home = cs.clusters[cs.cluster_of(1)]
    assert home.members == {1, 2, 3}
    assert home.center == 1
    assert cs.cluster_of(0) != home.id


def test_evict_stale():
    cs = ClusterSet(clusters={0: Cluster(0, 0, {0}, 7199), 1: Cluster(1, 1, {1}, 3 * 3600)})
    evict_stale(cs, 3600, 3 * 3600)
    assert set(cs.clusters) == {1}
    cs = ClusterSet(clusters={0: Cluster(0, 0, {0}, 3599)})
    assert set(evict_stale(cs, 3600, 3600).clusters) == {0}


def test_cluster_series():
    hist = {1: h(1, 2, 3), 2: h(0, 1, 0)}
    assert cluster_arrival_series(Cluster(0, 1, {1}, 0), hist).counts == [1, 2, 3]
    assert cluster_arrival_series(Cluster(0, 1, {1, 2}, 0), hist).counts == [1, 3, 3]


def test_cluster_series_rejects_mixed_intervals():
    hist = {1: ArrivalHistory(300, [1]), 2: ArrivalHistory(60, [1])}
    with pytest.raises(ValueError):
        cluster_arrival_series(Cluster(0, 1, {1, 2}, 0), hist)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 30))
def test_cluster_series_sum_to_global_arrivals(seed, rho):
    rng = np.random.default_rng(seed)
    shapes = [q(series=(s,)) for s in range(5)]
    queries = []
    for t in range(40):
        for s in range(5):
            for _ in range(int(rng.poisson(1 + s * (t % 3)))):
                base = shapes[s]
                queries.append(Query(0, 1, base.series, t * 300 + int(rng.integers(300)), 0, 0, base.fields))
    queries.sort(key=lambda x: x.issue_ts)
    tc = TemplateClusterer(interval=300, rho=rho, timeout=10**9, recheck_every=5)
    qi = 0
    for t in range(40):
        while qi < len(queries) and queries[qi].issue_ts < (t + 1) * 300:
            tc.observe(queries[qi])
            qi += 1
        tc.close_interval((t + 1) * 300)
    total = sum(tc.series(c) for c in tc.clusters())
    direct = per_interval_counts(queries, 0, 40, key=lambda _: "all")["all"]
    np.testing.assert_array_equal(total, direct)
    members = [m for c in tc.clusters() for m in c.members]
    assert sorted(members) == sorted(set(members))


def test_dump_lists_every_cluster():
    cs = _two_members([1], [100])
    text = dump_clusters(cs)
    assert text.count("\n") == 2
    assert text.startswith("cluster=0 center=0 members=0 counts=1")
