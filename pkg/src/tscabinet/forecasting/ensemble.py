"""Inverse-error weighted combination of the linear and LSTM forecasters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linear import LinearModel, fit_linear
from .lstm import LSTMForecaster, LSTMModel, step, train_lstm


def compute_weights(errors: Sequence[float]) -> tuple[float, ...]:
    """Normalised inverse errors: the more accurate model gets the larger share.

    A zero error takes all the weight (shared equally among zero-error models).
    """
    e = [float(x) for x in errors]
    if not e:
        raise ValueError("no errors given")
    if any(x < 0 or not np.isfinite(x) for x in e):
        raise ValueError(f"errors must be finite and non-negative, got {e}")
    zeros = [i for i, x in enumerate(e) if x == 0.0]
    if zeros:
        share = 1.0 / len(zeros)
        return tuple(share if i in zeros else 0.0 for i in range(len(e)))
    inv = [1.0 / x for x in e]
    total = sum(inv)
    w = [v / total for v in inv]
    # push the rounding residue onto the largest weight so the sum is exact
    top = max(range(len(w)), key=w.__getitem__)
    w[top] = 1.0 - sum(v for i, v in enumerate(w) if i != top)
    return tuple(w)


@dataclass
class EnsembleModel:
    linear: LinearModel
    lstm: LSTMModel
    weights: tuple[float, float]
    context: int = 16

    def __post_init__(self) -> None:
        w_lin, w_lstm = self.weights
        if w_lin < 0 or w_lstm < 0 or abs(w_lin + w_lstm - 1.0) > 1e-12:
            raise ValueError(f"weights must be non-negative and sum to 1, got {self.weights}")


def _lstm_one_step(model: LSTMModel, series: np.ndarray, start: int, context: int) -> np.ndarray:
    """One-step predictions for ``series[start:]``, each from a ``context``-long zero-state warm-up."""
    if start < context:
        raise ValueError(f"need {context} values before the first prediction")
    z = (series - model.mean) / model.std
    idx = np.arange(start, series.size)[:, None] + np.arange(-context, 0)[None, :]
    X = z[idx]
    h = np.zeros((X.shape[0], model.hidden))
    c = np.zeros_like(h)
    for t in range(context):
        y, h, c, _ = step(model, X[:, t], h, c)
    return y * model.std + model.mean


def validation_errors(
    linear: LinearModel, lstm: LSTMModel, series: np.ndarray, start: int, context: int = 16
) -> tuple[float, float]:
    """Sum of squared one-step errors of both members over ``series[start:]``."""
    actual = series[start:]
    e_lin = float(np.sum((linear.one_step(series, start) - actual) ** 2))
    e_lstm = float(np.sum((_lstm_one_step(lstm, series, start, context) - actual) ** 2))
    return e_lin, e_lstm


def fit_ensemble(
    history: Sequence[float],
    lag: int = 288,
    hidden: int = 8,
    epochs: int = 150,
    learning_rate: float = 0.1,
    seed: int = 0,
    validation_fraction: float = 0.2,
    window: int = 16,
    max_windows: int = 512,
) -> EnsembleModel:
    """Fit both members on the leading part of ``history`` and weight them on the tail.

    The members are then refitted on the full history with the same weights.
    ``lag`` shrinks to what the training split can support.
    """
    y = np.asarray(history, dtype=float)
    split = int(round(y.size * (1.0 - validation_fraction)))
    if split <= 2 * window or y.size - split < 1:
        raise ValueError(f"history of length {y.size} is too short to fit and validate")
    lag = max(1, min(lag, split // 2))
    lin = fit_linear(y[:split], lag)
    net = train_lstm(
        LSTMModel.init(hidden, seed), y[:split], epochs, learning_rate, seed, window, max_windows=max_windows
    )
    weights = compute_weights(validation_errors(lin, net, y, split, window))
    lin_full = fit_linear(y, lag)
    net_full = train_lstm(net, y, max(1, epochs // 3), learning_rate, seed, window, max_windows=max_windows)
    return EnsembleModel(lin_full, net_full, weights, window)


def ensemble_predict(ensemble: EnsembleModel, history: Sequence[float], steps: int) -> np.ndarray:
    """Autoregressive multi-step forecast, clamped at zero.

    Each step combines both members' one-step forecasts; the clamped
    combination is fed back to both as the next observation.
    """
    full = np.asarray(history, dtype=float)
    if full.size < ensemble.linear.lag:
        raise ValueError(f"history shorter than the linear lag {ensemble.linear.lag}")
    h = list(full[-max(ensemble.linear.lag, ensemble.context) :])
    w_lin, w_lstm = ensemble.weights
    net = LSTMForecaster(ensemble.lstm, ensemble.context)
    nxt_lstm = net.warm(h)
    out = np.empty(steps)
    for i in range(steps):
        nxt_lin = ensemble.linear.predict_next(h)
        value = max(0.0, w_lin * nxt_lin + w_lstm * nxt_lstm)
        out[i] = value
        h.append(value)
        if i + 1 < steps:
            nxt_lstm = net.feed(value)
    return out


def combine(w_lin: float, w_lstm: float, linear_forecast, lstm_forecast) -> np.ndarray:
    """Element-wise weighted combination of two forecasts, clamped at zero."""
    return np.maximum(0.0, w_lin * np.asarray(linear_forecast, float) + w_lstm * np.asarray(lstm_forecast, float))
