from __future__ import annotations

from .ensemble import EnsembleModel, compute_weights, ensemble_predict, fit_ensemble
from .evaluation import DEFAULT_HORIZONS, ForecastConfig, Metrics, metrics, naive_forecast, rolling_origin
from .linear import LinearModel, fit_linear
from .lstm import LSTMModel, TrainingError, loss_and_grads, lstm_forward, train_lstm

__all__ = [
    "DEFAULT_HORIZONS",
    "EnsembleModel",
    "ForecastConfig",
    "LSTMModel",
    "LinearModel",
    "Metrics",
    "TrainingError",
    "compute_weights",
    "ensemble_predict",
    "fit_ensemble",
    "fit_linear",
    "loss_and_grads",
    "lstm_forward",
    "metrics",
    "naive_forecast",
    "rolling_origin",
    "train_lstm",
]
