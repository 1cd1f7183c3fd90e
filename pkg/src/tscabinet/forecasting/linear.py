"""Autoregressive linear model fitted by ordinary least squares."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

RIDGE_LAMBDA = 1e-6


@dataclass
class LinearModel:
    intercept: float
    coef: np.ndarray  # coef[j] multiplies y_{t-1-j}
    lag: int
    ridge: bool = False

    def __post_init__(self) -> None:
        self.coef = np.asarray(self.coef, dtype=float)
        if self.coef.shape != (self.lag,):
            raise ValueError(f"expected {self.lag} coefficients, got shape {self.coef.shape}")

    def predict_next(self, history: Sequence[float]) -> float:
        h = np.asarray(history, dtype=float)
        if h.size < self.lag:
            raise ValueError(f"need at least {self.lag} values of history, got {h.size}")
        recent = h[-self.lag :][::-1]
        return float(self.intercept + recent @ self.coef)

    def forecast(self, history: Sequence[float], steps: int) -> np.ndarray:
        buf = list(np.asarray(history, dtype=float))
        out = np.empty(steps)
        for i in range(steps):
            out[i] = self.predict_next(buf)
            buf.append(out[i])
        return out

    def one_step(self, series: Sequence[float], start: int) -> np.ndarray:
        """Teacher-forced one-step predictions for ``series[start:]``."""
        y = np.asarray(series, dtype=float)
        X = lagged_design(y, self.lag)[start - self.lag :]
        return self.intercept + X @ self.coef


def lagged_design(y: np.ndarray, lag: int) -> np.ndarray:
    """Rows ``(y_{t-1}, ..., y_{t-lag})`` for ``t = lag .. len(y) - 1``."""
    n = y.size - lag
    return np.stack([y[lag - 1 - j : lag - 1 - j + n] for j in range(lag)], axis=1)


def fit_linear(history: Sequence[float], lag: int) -> LinearModel:
    """OLS fit of ``y_t`` on its ``lag`` predecessors.

    A rank-deficient design falls back to a ridge fit on centred columns
    (intercept unpenalised) with ``lambda = 1e-6``; the model is flagged.
    """
    if lag < 1:
        raise ValueError("lag must be at least 1")
    y = np.asarray(history, dtype=float)
    if y.size <= lag:
        raise ValueError(f"history of length {y.size} is too short for lag {lag}")
    X = lagged_design(y, lag)
    target = y[lag:]
    A = np.column_stack([np.ones(X.shape[0]), X])
    beta, _, rank, _ = np.linalg.lstsq(A, target, rcond=None)
    if rank == A.shape[1]:
        return LinearModel(float(beta[0]), beta[1:], lag)
    xm = X.mean(axis=0)
    ym = target.mean()
    Xc = X - xm
    coef = np.linalg.solve(Xc.T @ Xc + RIDGE_LAMBDA * np.eye(lag), Xc.T @ (target - ym))
    return LinearModel(float(ym - xm @ coef), coef, lag, ridge=True)
