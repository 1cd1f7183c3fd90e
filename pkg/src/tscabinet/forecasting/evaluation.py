"""Error metrics and rolling-origin evaluation over fixed horizons."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_HORIZONS = (1, 2, 3, 6, 12, 36, 72, 144)


@dataclass(frozen=True)
class ForecastConfig:
    interval: int = 300
    horizons: tuple[int, ...] = DEFAULT_HORIZONS

    def __post_init__(self) -> None:
        if self.interval <= 0:
            raise ValueError("interval must be positive")
        if not self.horizons or any(h <= 0 for h in self.horizons):
            raise ValueError("horizons must be positive")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ValueError(f"horizons must be strictly increasing: {self.horizons}")


@dataclass(frozen=True)
class Metrics:
    mse: float
    mae: float
    rmse: float


def metrics(predicted: Sequence[float], actual: Sequence[float]) -> Metrics:
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {a.shape}")
    if p.size == 0:
        raise ValueError("no values to score")
    err = p - a
    mse = float(np.mean(err**2))
    return Metrics(mse, float(np.mean(np.abs(err))), math.sqrt(mse))


def naive_forecast(history: Sequence[float], steps: int) -> np.ndarray:
    """Repeat the last observed value."""
    if len(history) == 0:
        raise ValueError("empty history")
    return np.full(steps, float(history[-1]))


Forecaster = Callable[[np.ndarray, int], np.ndarray]


def rolling_origin(
    series: Sequence[float],
    forecaster: Forecaster,
    first_origin: int,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    stride: int = 12,
) -> dict[int, Metrics]:
    """Score ``forecaster`` at each horizon over origins ``first_origin, +stride, ...``.

    An origin is used only when every horizon's target lies inside the series,
    so all horizons are scored on the same origins.
    """
    y = np.asarray(series, dtype=float)
    longest = max(horizons)
    origins = range(first_origin, y.size - longest + 1, stride)
    if not origins:
        raise ValueError("series too short for the requested horizons")
    preds: dict[int, list[float]] = {h: [] for h in horizons}
    actual: dict[int, list[float]] = {h: [] for h in horizons}
    for o in origins:
        fc = forecaster(y[:o], longest)
        for h in horizons:
            preds[h].append(float(fc[h - 1]))
            actual[h].append(float(y[o + h - 1]))
    return {h: metrics(preds[h], actual[h]) for h in horizons}


METRICS_HEADER = ("cluster_id", "horizon", "mse", "mae", "rmse")


def metric_rows(cluster_id: int, scores: dict[int, Metrics]) -> list[tuple]:
    return [(cluster_id, h, m.mse, m.mae, m.rmse) for h, m in sorted(scores.items())]


def write_metrics(rows: Iterable[tuple], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for cid, h, mse, mae, rmse in rows:
            w.writerow((cid, h, f"{mse:.6f}", f"{mae:.6f}", f"{rmse:.6f}"))
