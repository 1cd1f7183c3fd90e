"""Data-temperature model.

Each tracked piece of data carries a temperature that cools exponentially
(Newton's law of cooling with the ambient term dropped) and is heated by
accesses.  Accesses are only counted between window boundaries; the
temperature itself is recomputed once per window::

    T(t_n) = T(t_{n-1}) * exp(-k * w) + gamma * T_heat**4 * s / w

where ``w = t_n - t_{n-1}`` is the window and ``s`` the number of accesses
seen inside it.  Times are in seconds, so ``k`` is per second.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

DEFAULT_WINDOW = 300

_RECORD_STRUCT = struct.Struct(">If")
RECORD_SIZE = _RECORD_STRUCT.size  # 8 bytes: u32 timestamp + binary32 temperature


class ContractError(RuntimeError):
    """An operation was called outside of its calling contract."""


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class TemperatureParams:
    """Parameters of the temperature model.

    Attributes:
        k: Cooling rate per second.
        gamma: Heating rate (dimensionless).
        t_heat: Temperature of the heat source; also the temperature of
            freshly inserted data.
        window: Update window in seconds.
    """

    k: float = 0.1 / DEFAULT_WINDOW
    gamma: float = 1.0
    t_heat: float = 2.0
    window: int = DEFAULT_WINDOW

    def __post_init__(self) -> None:
        for name in ("k", "gamma", "t_heat", "window"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)!r}")

    @property
    def heat_per_access(self) -> float:
        return heat_increment(self.t_heat, 1, self.window, self.gamma)


@dataclass(frozen=True)
class TemperatureRecord:
    last_query_ts: int | None
    temperature: float | None
    pending_accesses: int = 0
    tracked: bool = True

    def __post_init__(self) -> None:
        if self.tracked:
            if self.temperature is None or self.last_query_ts is None:
                raise ValueError("tracked records need a timestamp and a temperature")
            if self.temperature < 0:
                raise ValueError("temperature must be non-negative")
        elif self.temperature is not None or self.last_query_ts is not None:
            raise ValueError("untracked records carry no timestamp/temperature payload")
        if self.pending_accesses < 0:
            raise ValueError("pending_accesses must be non-negative")


UNTRACKED = TemperatureRecord(None, None, 0, tracked=False)


class HeatClass(enum.Enum):
    HOT = "HOT"
    COLD = "COLD"
    OVERCOOLED = "OVERCOOLED"


@dataclass(frozen=True)
class Thresholds:
    hot: float
    overcooled: float

    def __post_init__(self) -> None:
        if not self.hot > self.overcooled or self.overcooled < 0:
            raise ValueError(
                f"need theta_hot > theta_overcooled >= 0, got hot={self.hot}, overcooled={self.overcooled}"
            )

    @classmethod
    def default_for(cls, params: TemperatureParams) -> Thresholds:
        return cls(hot=params.t_heat, overcooled=0.05 * params.t_heat)


def decay(t_prev: float, delta: float, k: float) -> float:
    if delta < 0:
        raise ValueError(f"elapsed time must be non-negative, got {delta}")
    if k <= 0:
        raise ValueError(f"cooling rate must be positive, got {k}")
    if t_prev < 0:
        raise ValueError(f"temperature must be non-negative, got {t_prev}")
    return t_prev * math.exp(-k * delta)


def heat_increment(t_heat: float, s: int, delta: float, gamma: float) -> float:
    """Heating contributed by ``s`` accesses spread over an interval ``delta``."""
    if delta <= 0:
        raise ValueError(f"heating interval must be positive, got {delta}")
    if s < 0:
        raise ValueError(f"access count must be non-negative, got {s}")
    return gamma * t_heat**4 * s / delta


def constant_heat_increment(t_heat: float, s: int, gamma: float) -> float:
    """Interval-free heating used by the constant-heating (TITLE) baseline."""
    if s < 0:
        raise ValueError(f"access count must be non-negative, got {s}")
    return gamma * t_heat**4 * s


def init_record(now: int, params: TemperatureParams) -> TemperatureRecord:
    return TemperatureRecord(last_query_ts=int(now), temperature=float(params.t_heat))


def record_access(record: TemperatureRecord) -> TemperatureRecord:
    if not record.tracked:
        raise ContractError("cannot record an access on an untracked record; re-initialise it first")
    return replace(record, pending_accesses=record.pending_accesses + 1)


def _check_boundary(record: TemperatureRecord, now: int, params: TemperatureParams) -> None:
    if not record.tracked:
        raise ContractError("update on an untracked record")
    if now - record.last_query_ts != params.window:
        raise ContractError(
            f"update called off a window boundary: now - last_query_ts = "
            f"{now - record.last_query_ts}, window = {params.window}"
        )


def update_temperature(record: TemperatureRecord, now: int, params: TemperatureParams) -> TemperatureRecord:
    """Fold the pending accesses of one window into the temperature."""
    _check_boundary(record, now, params)
    t = decay(record.temperature, params.window, params.k) + heat_increment(
        params.t_heat, record.pending_accesses, params.window, params.gamma
    )
    return TemperatureRecord(last_query_ts=int(now), temperature=t, pending_accesses=0)


def update_temperature_constant(
    record: TemperatureRecord, now: int, params: TemperatureParams
) -> TemperatureRecord:
    """Constant-heating update: each access adds ``gamma * T_heat**4`` regardless of the interval."""
    _check_boundary(record, now, params)
    t = decay(record.temperature, params.window, params.k) + constant_heat_increment(
        params.t_heat, record.pending_accesses, params.gamma
    )
    return TemperatureRecord(last_query_ts=int(now), temperature=t, pending_accesses=0)


def classify(temperature: float, thresholds: Thresholds) -> HeatClass:
    if temperature >= thresholds.hot:
        return HeatClass.HOT
    if temperature < thresholds.overcooled:
        return HeatClass.OVERCOOLED
    return HeatClass.COLD


def window_tick(
    records: Iterable[TemperatureRecord],
    now: int,
    params: TemperatureParams,
    thresholds: Thresholds | None = None,
) -> list[TemperatureRecord]:
    """Update every tracked record at a window boundary.

    Untracked records pass through.  When ``thresholds`` is given, records
    that fall below the over-cooled bound are dropped (become untracked).
    """
    out = []
    for rec in records:
        if not rec.tracked:
            out.append(rec)
            continue
        new = update_temperature(rec, now, params)
        if thresholds is not None and classify(new.temperature, thresholds) is HeatClass.OVERCOOLED:
            new = UNTRACKED
        out.append(new)
    return out


def temperature_trace(
    accesses_per_window: Sequence[int],
    params: TemperatureParams,
    start: int = 0,
    constant_heat: bool = False,
) -> list[float]:
    """Temperature of one segment, inserted at ``start``, after each window.

    ``accesses_per_window[i]`` accesses land in the window ending at
    ``start + (i + 1) * window``.
    """
    update = update_temperature_constant if constant_heat else update_temperature
    rec = init_record(start, params)
    out = []
    for i, s in enumerate(accesses_per_window):
        if s < 0:
            raise ValueError(f"access count must be non-negative, got {s}")
        rec = update(replace(rec, pending_accesses=int(s)), start + (i + 1) * params.window, params)
        out.append(rec.temperature)
    return out


def encode_record(record: TemperatureRecord) -> bytes:
    """Pack a tracked record as a big-endian u32 timestamp and a binary32 temperature."""
    if not record.tracked:
        raise EncodingError("untracked records have no encoding")
    ts = record.last_query_ts
    if not 0 <= ts <= 0xFFFFFFFF:
        raise EncodingError(f"timestamp {ts} does not fit in 32 bits")
    try:
        return _RECORD_STRUCT.pack(ts, record.temperature)
    except OverflowError as exc:
        raise EncodingError(f"temperature {record.temperature} overflows binary32") from exc


def decode_record(data: bytes) -> TemperatureRecord:
    if len(data) != RECORD_SIZE:
        raise EncodingError(f"expected {RECORD_SIZE} bytes, got {len(data)}")
    ts, temp = _RECORD_STRUCT.unpack(data)
    return TemperatureRecord(last_query_ts=ts, temperature=temp)


class TemperatureTable:
    """Dense, vectorised store of temperature records over a (series, bucket) grid.

    Semantically equivalent to holding one :class:`TemperatureRecord` per
    cell and calling :func:`window_tick` on all of them; only the storage
    is columnar so the simulator can tick hundreds of thousands of records.
    ``constant_heat`` switches the heating term to the interval-free
    baseline.
    """

    def __init__(
        self,
        shape: tuple[int, int],
        params: TemperatureParams,
        thresholds: Thresholds,
        constant_heat: bool = False,
    ):
        self.params = params
        self.thresholds = thresholds
        self.constant_heat = constant_heat
        self.temperature = np.zeros(shape, dtype=np.float64)
        self.pending = np.zeros(shape, dtype=np.int64)
        self.tracked = np.zeros(shape, dtype=bool)
        self.last_ts = np.zeros(shape, dtype=np.int64)
        self._decay = math.exp(-params.k * params.window)
        if constant_heat:
            self._heat = constant_heat_increment(params.t_heat, 1, params.gamma)
        else:
            self._heat = heat_increment(params.t_heat, 1, params.window, params.gamma)

    @property
    def shape(self) -> tuple[int, int]:
        return self.temperature.shape

    def init(self, index, now: int) -> None:
        """Initialise (or re-initialise) records at ``index`` to the heat-source temperature."""
        self.temperature[index] = self.params.t_heat
        self.pending[index] = 0
        self.tracked[index] = True
        self.last_ts[index] = now

    def access(self, series: int, b0: int, b1: int, window_start: int) -> None:
        """Count one access on buckets ``b0..b1`` (inclusive) of ``series``.

        Untracked cells are re-initialised at ``window_start`` first, so the
        next boundary update sees exactly one window of elapsed time.
        """
        sl = (series, slice(b0, b1 + 1))
        cold = ~self.tracked[sl]
        if cold.any():
            idx = np.nonzero(cold)[0] + b0
            self.init((series, idx), window_start)
        self.pending[sl] += 1

    def tick(self, now: int) -> np.ndarray:
        """Window-boundary update; returns a mask of records dropped as over-cooled."""
        tr = self.tracked
        if tr.any():
            bad = tr & (self.last_ts != now - self.params.window)
            if bad.any():
                raise ContractError(f"{int(bad.sum())} records are not on the window boundary at t={now}")
        self.temperature[tr] = self.temperature[tr] * self._decay + self._heat * self.pending[tr]
        self.pending[tr] = 0
        self.last_ts[tr] = now
        dropped = tr & (self.temperature < self.thresholds.overcooled)
        if dropped.any():
            self.temperature[dropped] = 0.0
            self.tracked[dropped] = False
            self.last_ts[dropped] = 0
        return dropped

    def record(self, series: int, bucket: int) -> TemperatureRecord:
        if not self.tracked[series, bucket]:
            return UNTRACKED
        return TemperatureRecord(
            last_query_ts=int(self.last_ts[series, bucket]),
            temperature=float(self.temperature[series, bucket]),
            pending_accesses=int(self.pending[series, bucket]),
        )

    def current(self) -> np.ndarray:
        """Temperatures with untracked cells reported as 0."""
        return np.where(self.tracked, self.temperature, 0.0)
