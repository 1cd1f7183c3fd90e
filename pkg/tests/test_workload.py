from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tscabinet.workload import (
    DAY,
    HOUR,
    Chaos,
    Cycles,
    Query,
    QueryTemplate,
    RangeModel,
    Schema,
    SchemaError,
    Spike,
    Stability,
    arrival_count,
    assign_patterns,
    build_template_summary,
    format_query,
    generate,
    parse_query,
    per_interval_counts,
    rate_at,
    read_workload,
    write_workload,
)

POLLUTION = Schema(
    "pollution",
    ("ozone", "particullate_matter", "carbon_monoxide", "sulfure_dioxide", "nitrogen_dioxide"),
    ("longitude", "latitude"),
    tuple((f"10.{i}", f"56.{i}") for i in range(4)),
)
MINIMAL = Schema("m", ("value",), ("sensor",), (("a",),))


def test_summary_covers_every_kind():
    tpls = build_template_summary(POLLUTION, seed=3)
    assert len(tpls) >= 5
    assert {t.kind for t in tpls} == {1, 2, 3, 4, 5}


def test_summary_on_minimal_schema():
    tpls = build_template_summary(MINIMAL)
    assert len(tpls) == 5
    assert all(t.fields == ("value",) for t in tpls)


def test_summary_is_deterministic():
    assert build_template_summary(POLLUTION, seed=9, per_kind=2) == build_template_summary(POLLUTION, seed=9, per_kind=2)


@pytest.mark.parametrize(
    "schema",
    [Schema("m", (), ("t",), (("a",),)), Schema("m", ("f",), (), (("a",),)), Schema("m", ("f",), ("t",), ())],
)
def test_summary_rejects_degenerate_schema(schema):
    with pytest.raises(SchemaError):
        build_template_summary(schema)


def test_template_validation():
    with pytest.raises(ValueError):
        QueryTemplate(0, 1, ("f",), (0, 1))
    with pytest.raises(ValueError):
        QueryTemplate(0, 3, ("f",), (0,), operator=None)
    with pytest.raises(ValueError):
        QueryTemplate(0, 5, ("f",), (0, 1), operator="AVG", groupby=None)
    with pytest.raises(ValueError):
        QueryTemplate(0, 6, ("f",), (0,))


def test_stability_count():
    assert arrival_count(Stability(10), (0, 300)) == 10


def test_cycles_peak():
    evening = Cycles(DAY, ((18 * HOUR, 3 * HOUR, 50.0),), base_rate=1.0)
    assert arrival_count(evening, (19 * HOUR, 19 * HOUR + 300)) == 50
    assert arrival_count(evening, (12 * HOUR, 12 * HOUR + 300)) == 1
    # the next day repeats
    assert arrival_count(evening, (DAY + 19 * HOUR, DAY + 19 * HOUR + 300)) == 50


def test_spike_limits():
    spike = Spike(center=1000, peak_rate=20.0, decay_constant=0.01)
    assert rate_at(spike, 1000) == 20.0
    assert arrival_count(spike, (1000, 1300)) == 20
    assert arrival_count(spike, (10**6, 10**6 + 300)) == 0


def test_chaos_is_reproducible_and_bounded():
    chaos = Chaos(seed=4, max_rate=7.0)
    counts = [arrival_count(chaos, (t, t + 300)) for t in range(0, 300 * 200, 300)]
    assert counts == [arrival_count(chaos, (t, t + 300)) for t in range(0, 300 * 200, 300)]
    assert 0 <= min(counts) and max(counts) <= 7
    assert len(set(counts)) > 1


def test_negative_rates_rejected():
    with pytest.raises(ValueError):
        arrival_count(Stability(-1), (0, 300))
    with pytest.raises(ValueError):
        arrival_count(Stability(1), (300, 300))


def test_generate_exact_count():
    tpl = QueryTemplate(0, 1, ("f",), (0,))
    qs = generate([tpl], {0: Stability(2)}, horizon=900, data_time_domain=(0, 10**6), seed=0, start=3000)
    assert len(qs) == 6
    assert all(3000 <= q.issue_ts < 3900 for q in qs)


def test_generate_is_deterministic(tmp_path):
    tpls = build_template_summary(POLLUTION, seed=1)
    pats = assign_patterns(tpls, [Stability(1), Cycles(DAY, ((0, HOUR, 5.0),), 0.5)], seed=1)
    a = generate(tpls, pats, DAY, (0, 10 * DAY), seed=5)
    b = generate(tpls, pats, DAY, (0, 10 * DAY), seed=5)
    write_workload(a, tmp_path / "a.csv")
    write_workload(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_per_template_counts_match_pattern_sums():
    tpls = build_template_summary(POLLUTION, seed=2)
    patterns = [
        Stability(1.5),
        Cycles(DAY, ((6 * HOUR, 2 * HOUR, 4.0),), 0.5),
        Spike(12 * HOUR, 6.0, 1e-4),
        Chaos(11, 3.0),
        Stability(0.2),
    ]
    assign = {t.template_id: patterns[i] for i, t in enumerate(tpls)}
    qs = generate(tpls, assign, DAY, (0, 3 * DAY), seed=0, start=DAY)
    counts = per_interval_counts(qs, DAY, DAY // 300)
    for t in tpls:
        expected = sum(arrival_count(assign[t.template_id], (s, s + 300)) for s in range(DAY, 2 * DAY, 300))
        assert int(counts.get(t.template_id, np.zeros(1)).sum()) == expected


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([HOUR, 6 * HOUR, DAY]), st.floats(0.1, 0.95))
def test_ranges_stay_inside_domain_and_before_issue(seed, within, fraction):
    tpls = build_template_summary(MINIMAL, seed=seed % 100)
    qs = generate(
        tpls,
        {t.template_id: Stability(1) for t in tpls},
        6 * HOUR,
        (0, 2 * DAY),
        seed=seed,
        ranges=RangeModel.with_quantile(fraction, within),
    )
    assert qs
    for q in qs:
        assert 0 <= q.t_start <= q.t_end <= min(q.issue_ts, 2 * DAY)


def test_recency_quantile():
    rm = RangeModel.with_quantile(0.8, HOUR)
    rng = np.random.default_rng(0)
    ages = rng.exponential(1 / rm.recency_rate, size=200_000)
    assert np.mean(ages <= HOUR) == pytest.approx(0.8, abs=0.005)


def test_query_line_round_trip(tmp_path):
    q = Query(3, 2, (1, 4), 1000, 100, 900, operator=None)
    assert parse_query(format_query(q)) == Query(3, 2, (1, 4), 1000, 100, 900)
    write_workload([q], tmp_path / "w.csv")
    assert read_workload(tmp_path / "w.csv") == [parse_query(format_query(q))]


def test_read_workload_rejects_bad_header(tmp_path):
    (tmp_path / "w.csv").write_text("nope\n")
    with pytest.raises(ValueError):
        read_workload(tmp_path / "w.csv")


def test_query_range_must_be_ordered():
    with pytest.raises(ValueError):
        Query(0, 1, (0,), 10, 5, 4)
