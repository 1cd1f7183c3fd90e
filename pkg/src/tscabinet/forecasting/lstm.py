"""Single-layer LSTM over a scalar series, written directly in numpy.

Gates follow the usual formulation::

    f = sigmoid(Wfx x + Wfh h + bf)     i = sigmoid(Wix x + Wih h + bi)
    g = tanh(Wgx x + Wgh h + bg)        o = sigmoid(Wox x + Woh h + bo)
    C = g * i + C_prev * f              h = tanh(C) * o

and a linear read-out ``y = w_out . h + b_out``.  Training is truncated
backpropagation through time over fixed-length windows, each started from a
zero state, with full-batch gradient descent and global-norm clipping.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

GATES = ("f", "i", "g", "o")
PARAM_NAMES = (
    "Wfx", "Wix", "Wgx", "Wox",
    "Wfh", "Wih", "Wgh", "Woh",
    "bf", "bi", "bg", "bo",
    "w_out", "b_out",
)  # fmt: skip


class TrainingError(RuntimeError):
    pass


@dataclass
class LSTMModel:
    hidden: int
    Wfx: np.ndarray
    Wix: np.ndarray
    Wgx: np.ndarray
    Wox: np.ndarray
    Wfh: np.ndarray
    Wih: np.ndarray
    Wgh: np.ndarray
    Woh: np.ndarray
    bf: np.ndarray
    bi: np.ndarray
    bg: np.ndarray
    bo: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    # standardisation applied to inputs/targets
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self) -> None:
        h = self.hidden
        for name in PARAM_NAMES:
            arr = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, arr)
            want = _shape(name, h)
            if arr.shape != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected {want}")

    @classmethod
    def zeros(cls, hidden: int) -> LSTMModel:
        return cls(hidden, **{n: np.zeros(_shape(n, hidden)) for n in PARAM_NAMES})

    @classmethod
    def init(cls, hidden: int, seed: int = 0) -> LSTMModel:
        rng = np.random.default_rng(seed)
        bound = 1.0 / math.sqrt(hidden)
        params = {n: rng.uniform(-bound, bound, size=_shape(n, hidden)) for n in PARAM_NAMES}
        params["bf"] = np.ones(hidden)
        params["b_out"] = np.zeros(())
        return cls(hidden, **params)

    def params(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def with_params(self, params: dict[str, np.ndarray]) -> LSTMModel:
        return replace(self, **{n: np.array(params[n], dtype=float) for n in PARAM_NAMES})

    def copy(self) -> LSTMModel:
        return self.with_params(self.params())


def _shape(name: str, h: int) -> tuple[int, ...]:
    if name.endswith("h") and name.startswith("W"):
        return (h, h)
    if name == "b_out":
        return ()
    return (h,)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def step(model: LSTMModel, x, h_prev, c_prev):
    """One time step for a batch: ``x`` has shape (B,), states (B, hidden)."""
    x = np.asarray(x, dtype=float)[:, None]
    f = _sigmoid(x * model.Wfx + h_prev @ model.Wfh.T + model.bf)
    i = _sigmoid(x * model.Wix + h_prev @ model.Wih.T + model.bi)
    g = np.tanh(x * model.Wgx + h_prev @ model.Wgh.T + model.bg)
    o = _sigmoid(x * model.Wox + h_prev @ model.Woh.T + model.bo)
    c = g * i + c_prev * f
    tc = np.tanh(c)
    h = tc * o
    y = h @ model.w_out + model.b_out
    return y, h, c, (f, i, g, o, tc)


def lstm_forward(model: LSTMModel, sequence: Sequence[float], state=None):
    """Run the recurrence over ``sequence`` (in model units, no standardisation).

    Returns ``(outputs, (h, c))``; starts from zero state unless ``state`` is given.
    """
    seq = np.asarray(sequence, dtype=float)
    if seq.size == 0:
        raise ValueError("empty sequence")
    if state is None:
        h = np.zeros((1, model.hidden))
        c = np.zeros((1, model.hidden))
    else:
        h, c = (np.asarray(s, dtype=float).reshape(1, model.hidden) for s in state)
    out = np.empty(seq.size)
    for t, x in enumerate(seq):
        y, h, c, _ = step(model, [x], h, c)
        out[t] = y[0]
    return out, (h[0].copy(), c[0].copy())


def loss_and_grads(model: LSTMModel, inputs: np.ndarray, targets: np.ndarray):
    """Mean squared error over a batch of windows and its exact gradient.

    ``inputs`` and ``targets`` have shape (B, T); every window starts from a
    zero state.
    """
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(targets, dtype=float)
    B, T = X.shape
    H = model.hidden
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = []
    preds = np.empty((B, T))
    for t in range(T):
        h_prev, c_prev = h, c
        y, h, c, gates = step(model, X[:, t], h_prev, c_prev)
        preds[:, t] = y
        cache.append((h_prev, c_prev, h, gates))
    err = preds - Y
    loss = float(np.mean(err**2))

    g = {n: np.zeros_like(p) for n, p in model.params().items()}
    dy = 2.0 * err / (B * T)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(T)):
        h_prev, c_prev, h, (f, i, gg, o, tc) = cache[t]
        dyt = dy[:, t]
        g["w_out"] += h.T @ dyt
        g["b_out"] += dyt.sum()
        dh = dyt[:, None] * model.w_out + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc**2) + dc_next
        df = dc * c_prev
        di = dc * gg
        dg = dc * i
        dc_next = dc * f
        da = {
            "f": df * f * (1.0 - f),
            "i": di * i * (1.0 - i),
            "g": dg * (1.0 - gg**2),
            "o": do * o * (1.0 - o),
        }
        xt = X[:, t][:, None]
        dh_next = np.zeros((B, H))
        for gate in GATES:
            a = da[gate]
            g[f"W{gate}x"] += (a * xt).sum(axis=0)
            g[f"W{gate}h"] += a.T @ h_prev
            g[f"b{gate}"] += a.sum(axis=0)
            dh_next += a @ getattr(model, f"W{gate}h")
    return loss, g


def _windows(z: np.ndarray, window: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    starts = np.arange(0, z.size - window, stride)
    idx = starts[:, None] + np.arange(window)[None, :]
    return z[idx], z[idx + 1]


def train_lstm(
    model: LSTMModel,
    series: Sequence[float],
    epochs: int = 200,
    learning_rate: float = 0.1,
    seed: int = 0,
    window: int = 16,
    stride: int = 1,
    clip: float = 5.0,
    standardize: bool = True,
    max_windows: int = 512,
) -> LSTMModel:
    """Fit one-step-ahead prediction on ``series``; returns a new model.

    The returned parameters are the best seen over all epochs (by training
    loss), so the final loss never exceeds the initial one.  ``seed`` fixes
    which windows are kept when the series yields more than ``max_windows``;
    plain full-batch descent is otherwise deterministic.
    """
    y = np.asarray(series, dtype=float)
    if y.size < 2 * window:
        raise ValueError(f"series of length {y.size} is shorter than two windows ({2 * window})")
    if standardize:
        mean = float(y.mean())
        std = float(y.std()) or 1.0
    else:
        mean, std = model.mean, model.std
    z = (y - mean) / std
    X, Y = _windows(z, window, stride)
    rng = np.random.default_rng(seed)
    # keep the batch bounded; the subsample is fixed for the whole run
    if X.shape[0] > max_windows:
        keep = np.sort(rng.choice(X.shape[0], size=max_windows, replace=False))
        X, Y = X[keep], Y[keep]

    cur = replace(model.copy(), mean=mean, std=std)
    best_loss, _ = loss_and_grads(cur, X, Y)
    best = cur.copy()
    params = cur.params()
    for epoch in range(epochs):
        loss, grads = loss_and_grads(cur, X, Y)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss} at epoch {epoch}")
        if loss < best_loss:
            best_loss, best = loss, cur.copy()
        norm = math.sqrt(sum(float(np.sum(gv**2)) for gv in grads.values()))
        scale = clip / norm if norm > clip else 1.0
        params = {n: params[n] - learning_rate * scale * grads[n] for n in PARAM_NAMES}
        cur = cur.with_params(params)
    final, _ = loss_and_grads(cur, X, Y)
    if math.isfinite(final) and final < best_loss:
        best_loss, best = final, cur
    log.debug("lstm trained: loss %.6g", best_loss)
    return best


def one_step_loss(model: LSTMModel, series: Sequence[float], window: int = 16) -> float:
    """Mean squared one-step-ahead error (standardised units) over all windows of ``series``."""
    z = (np.asarray(series, dtype=float) - model.mean) / model.std
    X, Y = _windows(z, window, 1)
    loss, _ = loss_and_grads(model, X, Y)
    return loss


class LSTMForecaster:
    """Stateful stepping in data units on top of a trained model."""

    def __init__(self, model: LSTMModel, context: int = 16):
        self.model = model
        self.context = context

    def warm(self, history: Sequence[float]) -> float:
        m = self.model
        z = (np.asarray(history, dtype=float)[-self.context :] - m.mean) / m.std
        out, (h, c) = lstm_forward(m, z)
        self._h, self._c = h[None, :], c[None, :]
        return float(out[-1] * m.std + m.mean)

    def feed(self, value: float) -> float:
        m = self.model
        y, self._h, self._c, _ = step(m, [(value - m.mean) / m.std], self._h, self._c)
        return float(y[0] * m.std + m.mean)
