"""Plain-text model snapshots.

Layout::

    tscabinet-forecast v1
    linear lag=<n> ridge=<0|1>
    intercept <value>
    coef <n>
    <n values, one per line>
    lstm hidden=<h> mean=<m> std=<s>
    <param> <dims...>
    <values, row-major, one per line>
    ...
    weights <w_lin> <w_lstm>
    context <c>

Floats are written with ``repr`` so a reload is bit-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ensemble import EnsembleModel
from .linear import LinearModel
from .lstm import PARAM_NAMES, LSTMModel

MAGIC = "tscabinet-forecast v1"


class SnapshotError(ValueError):
    pass


def _kv(token_list: list[str]) -> dict[str, str]:
    return dict(t.split("=", 1) for t in token_list)


def dumps(model: EnsembleModel) -> str:
    lin, net = model.linear, model.lstm
    out = [MAGIC, f"linear lag={lin.lag} ridge={int(lin.ridge)}", f"intercept {lin.intercept!r}"]
    out.append(f"coef {lin.lag}")
    out.extend(repr(float(v)) for v in lin.coef)
    out.append(f"lstm hidden={net.hidden} mean={net.mean!r} std={net.std!r}")
    for name in PARAM_NAMES:
        arr = getattr(net, name)
        out.append(" ".join([name, *map(str, arr.shape)]))
        out.extend(repr(float(v)) for v in arr.ravel())
    out.append(f"weights {model.weights[0]!r} {model.weights[1]!r}")
    out.append(f"context {model.context}")
    return "\n".join(out) + "\n"


def loads(text: str) -> EnsembleModel:
    lines = text.splitlines()
    pos = 0

    def take() -> list[str]:
        nonlocal pos
        if pos >= len(lines):
            raise SnapshotError("snapshot ends early")
        pos += 1
        return lines[pos - 1].split()

    def values(n: int) -> np.ndarray:
        return np.array([float(take()[0]) for _ in range(n)])

    if lines[:1] != [MAGIC]:
        raise SnapshotError(f"unsupported snapshot header {lines[:1]!r}")
    pos = 1
    head = take()
    if head[0] != "linear":
        raise SnapshotError("expected linear section")
    meta = _kv(head[1:])
    lag = int(meta["lag"])
    intercept = float(take()[1])
    tag, n = take()
    if tag != "coef" or int(n) != lag:
        raise SnapshotError("coefficient count does not match lag")
    lin = LinearModel(intercept, values(lag), lag, ridge=meta["ridge"] == "1")
    head = take()
    if head[0] != "lstm":
        raise SnapshotError("expected lstm section")
    meta = _kv(head[1:])
    hidden = int(meta["hidden"])
    params = {}
    for name in PARAM_NAMES:
        tok = take()
        if tok[0] != name:
            raise SnapshotError(f"expected {name}, found {tok[0]}")
        shape = tuple(int(d) for d in tok[1:])
        params[name] = values(int(np.prod(shape))).reshape(shape)
    net = LSTMModel(hidden, **params, mean=float(meta["mean"]), std=float(meta["std"]))
    _, w_lin, w_lstm = take()
    _, context = take()
    return EnsembleModel(lin, net, (float(w_lin), float(w_lstm)), int(context))


def save(model: EnsembleModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model))


def load(path: str | Path) -> EnsembleModel:
    return loads(Path(path).read_text())
