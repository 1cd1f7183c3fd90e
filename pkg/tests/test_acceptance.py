"""Acceptance checks, one test per criterion.

Each test records a ``PASS``/``FAIL`` line that pytest prints in an
"acceptance criteria" section at the end of the run, then asserts.
Run just these with ``pytest tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import random
import time
from pathlib import Path

import numpy as np
import pytest

from tscabinet.clustering import dtw_distance
from tscabinet.forecasting import ensemble_predict, fit_ensemble, naive_forecast, rolling_origin
from tscabinet.forecasting.ensemble import compute_weights
from tscabinet.forecasting.lstm import PARAM_NAMES, LSTMModel, loss_and_grads
from tscabinet.frequent import mg_run
from tscabinet.harness.cli import main
from tscabinet.harness.config import load_config
from tscabinet.harness.experiment import build_scenario, run_experiment, sweep
from tscabinet.temperature import (
    RECORD_SIZE,
    TemperatureParams,
    TemperatureRecord,
    decode_record,
    encode_record,
    heat_increment,
    temperature_trace,
)
from tscabinet.workload import DAY, HOUR, Cycles, arrival_count

from conftest import ACCEPTANCE_LINES
from oracles import dtw_brute_against, exact_counts, finite_difference_grads, relative_error

ROOT = Path(__file__).resolve().parents[1]
SCENARIO_CONFIG = ROOT / "configs" / "acceptance.conf"


def record(number: int, name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} {number} {name}: {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


@pytest.fixture(scope="module")
def scenario():
    return build_scenario(load_config(SCENARIO_CONFIG))


def test_01_access_traces():
    t0 = time.perf_counter()
    params = TemperatureParams()
    # A: early and late accesses; B: a burst in the middle
    trace_a = temperature_trace([1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 2], params)
    trace_b = temperature_trace([0, 0, 1, 1, 3, 0, 0, 0, 0, 0, 0], params)
    elapsed = time.perf_counter() - t0
    ok = trace_b[2] > trace_a[2] and trace_b[3] > trace_a[3] and trace_b[10] < trace_a[10] and elapsed < 1
    detail = (
        f"T(3) A={trace_a[2]:.4f} B={trace_b[2]:.4f}, T(4) A={trace_a[3]:.4f} B={trace_b[3]:.4f}, "
        f"T(11) A={trace_a[10]:.4f} B={trace_b[10]:.4f}, {elapsed * 1000:.1f} ms"
    )
    record(1, "access traces", ok, detail)


def test_02_interval_sensitivity():
    rng = random.Random(2)
    violations = 0
    for _ in range(1000):
        t_heat = rng.uniform(0.1, 10)
        gamma = rng.uniform(0.1, 10)
        s = rng.randint(1, 1000)
        d1 = rng.uniform(1e-3, 1e4)
        d2 = d1 + rng.uniform(1e-3, 1e4)
        if not heat_increment(t_heat, s, d1, gamma) > heat_increment(t_heat, s, d2, gamma):
            violations += 1
    record(2, "interval sensitivity", violations == 0, f"{violations} violations in 1000 cases")


def test_03_frequent_guarantee():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    bad = 0
    for i in range(200):
        k = (4, 8, 16, 64)[i % 4]
        m = int(rng.integers(1, 10_001))
        universe = int(rng.integers(1, 101))
        # skewed draws so some buckets clear m/k
        weights = rng.pareto(1.0, universe) + 1e-3
        stream = rng.choice(universe, size=m, p=weights / weights.sum()).tolist()
        table = mg_run(stream, k)
        for item, f in exact_counts(stream).items():
            c = table.entries.get(item, 0)
            if not f - m / k <= c <= f or (f > m / k and item not in table):
                bad += 1
    elapsed = time.perf_counter() - t0
    record(3, "frequent-item bound", bad == 0 and elapsed < 10, f"{bad} violations, {elapsed:.1f} s")


def test_04_dtw_exhaustive():
    seqs = [s for n in range(1, 7) for s in itertools.product((0.0, 1.0, 2.0), repeat=n)]
    mismatches = 0
    for a in seqs:
        oracle = dtw_brute_against(a)
        mismatches += sum(dtw_distance(a, b) != oracle(b) for b in seqs)
    record(4, "dtw exhaustive", mismatches == 0, f"{mismatches} mismatches over {len(seqs) ** 2} pairs")


def test_05_gradient_check():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(500 + seed)
        model = LSTMModel.init(2, seed)
        model = model.with_params({n: rng.normal(0, 0.5, size=np.shape(p)) for n, p in model.params().items()})
        inputs, targets = rng.normal(size=(3, 6)), rng.normal(size=(3, 6))
        _, grads = loss_and_grads(model, inputs, targets)
        numeric = finite_difference_grads(model, inputs, targets, 1e-5)
        worst = max(worst, *(relative_error(grads[n], numeric[n]) for n in PARAM_NAMES))
    record(5, "lstm gradients", worst <= 1e-4, f"worst relative error {worst:.2e} over 20 instances")


def test_06_ensemble_weights():
    rng = random.Random(6)
    bad = 0
    for _ in range(1000):
        e1, e2 = rng.uniform(1e-6, 100), rng.uniform(1e-6, 100)
        w = compute_weights([e1, e2])
        if abs(sum(w) - 1) > 1e-12 or (e1 < e2) != (w[0] > w[1]):
            bad += 1
    exact = compute_weights([1, 3]) == (0.75, 0.25)
    record(6, "ensemble weights", bad == 0 and exact, f"{bad} bad pairs, (1,3) -> {compute_weights([1, 3])}")


def test_07_forecast_beats_naive():
    pattern = Cycles(DAY, ((8 * HOUR, 3 * HOUR, 12.0), (18 * HOUR, 2 * HOUR, 6.0)), 1.0)
    series = np.array([arrival_count(pattern, (t, t + 300)) for t in range(0, 14 * DAY, 300)], dtype=float)
    split = 10 * 288
    model = fit_ensemble(series[:split], lag=288, seed=0)
    horizons = (1, 2, 3, 6, 12, 36, 72, 144)
    ours = rolling_origin(series, lambda h, n: ensemble_predict(model, h, n), split, horizons, stride=12)
    naive = rolling_origin(series, naive_forecast, split, horizons, stride=12)
    losing = [h for h in horizons if not ours[h].rmse < naive[h].rmse]
    detail = ", ".join(f"h{h} {ours[h].rmse:.3g}/{naive[h].rmse:.3g}" for h in (1, 12, 144))
    record(7, "forecast vs naive", not losing, f"rmse ensemble/naive {detail}; losing horizons {losing}")


def test_08_hit_rate_ordering(scenario):
    t0 = time.perf_counter()
    cfg = load_config(SCENARIO_CONFIG, {"policies": "TSCABINET,TSCABINET_NO_FORECAST,TITLE"})
    rep = run_experiment(cfg, scenario, keep_log=False, evaluate_forecasts=False)
    elapsed = time.perf_counter() - t0
    full, no_fc, title = (rep.result(p).hit_rate for p in ("TSCABINET", "TSCABINET_NO_FORECAST", "TITLE"))
    ok = full >= no_fc >= title and full - title >= 0.05 and elapsed < 120
    detail = f"TSCABINET {full:.4f} >= NO_FORECAST {no_fc:.4f} >= TITLE {title:.4f}, gap {full - title:.4f}, {elapsed:.0f} s"
    record(8, "hit-rate ordering", ok, detail)


def test_09_capacity_monotone(scenario):
    total = scenario.total_points
    caps = [int(total * f) for f in (0.025, 0.05, 0.10, 0.20, 0.40)]
    reps = sweep(scenario.cfg, caps, scenario)
    broken = []
    lines = []
    for policy in scenario.cfg.policy_list():
        rates = [r.result(policy).hit_rate for r in reps]
        lines.append(f"{policy} " + "/".join(f"{x:.3f}" for x in rates))
        if any(b < a for a, b in zip(rates, rates[1:])):
            broken.append(policy)
    record(9, "capacity monotonicity", not broken, f"{'; '.join(lines)}; decreasing: {broken}")


def test_10_record_encoding():
    rng = np.random.default_rng(10)
    stamps = rng.integers(0, 2**32, size=100_000)
    temps = rng.uniform(0, 1e6, size=100_000).astype(np.float32)
    bad = 0
    for ts, temp in zip(stamps.tolist(), temps.tolist()):
        rec = TemperatureRecord(ts, temp)
        blob = encode_record(rec)
        if len(blob) != RECORD_SIZE or RECORD_SIZE != 8 or decode_record(blob) != rec:
            bad += 1
    record(10, "record encoding", bad == 0, f"{bad} failures in 100000 round trips of {RECORD_SIZE} bytes")


def test_11_cli_determinism(tmp_path, capsys):
    small = {
        "dataset_series": "4",
        "dataset_days": "10",
        "warmup_days": "1",
        "measure_days": "0.5",
        "forecast_epochs": "3",
        "forecast_lag": "48",
        "forecast_refit": "96",
    }
    args = [a for k, v in small.items() for a in ("--set", f"{k}={v}")]
    codes = [main(["run", "--seed", "11", *args, "--out", str(tmp_path / name)]) for name in ("a", "b")]
    capsys.readouterr()
    same = (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()
    record(11, "run determinism", codes == [0, 0] and same, f"exit codes {codes}, report.csv identical: {same}")
