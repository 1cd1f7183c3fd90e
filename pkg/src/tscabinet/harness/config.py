"""Flat ``key = value`` experiment configuration.

Lines starting with ``#`` are comments.  Every key below may appear at most
once; unknown keys are rejected.  Command-line flags override file values.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

POLICIES = ("TSCABINET", "TSCABINET_NO_FORECAST", "TITLE", "LRU")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # dataset: CSV path, or empty for the built-in synthetic generator
    dataset: str = ""
    dataset_series: int = 8
    dataset_days: int = 90
    dataset_step: int = 300
    seed: int = 0
    policies: str = ",".join(POLICIES)

    # temperature model; k is per second, window in seconds
    temp_k: float = 0.1 / 300
    temp_gamma: float = 1.0
    temp_t_heat: float = 2.0
    window: int = 300
    # hot / over-cooled thresholds; unset means t_heat and 0.05 * t_heat
    theta_hot: float | None = None
    theta_overcooled: float | None = None

    # CLOUD + EDGE capacity in data points; unset means capacity_fraction of the dataset
    capacity: int | None = None
    capacity_fraction: float = 0.10
    edge_fraction: float = 0.5
    preheat_budget: int = 20000
    # over-cooled segments younger than this keep their raw points
    summary_min_age: int = 30 * 86400

    # workload: a replay file, or generated from the template summary
    workload: str = ""
    templates_per_kind: int = 2
    patterns: str = "cycles"
    peak_width: int = 3600
    peak_rate: float = 6.0
    base_rate: float = 0.0
    durations: str = "3600,21600,86400"
    recency_fraction: float = 0.8
    recency_within: int = 86400
    warmup_days: float = 3.0
    measure_days: float = 3.0

    # template clustering
    cluster_rho: float = 10.0
    cluster_timeout: int = 86400

    # forecasting; horizon and refit period are in windows
    forecast_lag: int = 288
    forecast_hidden: int = 8
    forecast_epochs: int = 20
    forecast_lr: float = 0.1
    forecast_windows: int = 128
    forecast_horizon: int = 3
    forecast_refit: int = 288
    forecast_eval_horizons: str = "1,2,3,6,12,36,72,144"

    # frequent-timestamp mining over query ages
    freq_k: int = 64
    freq_bucket: int = 3600

    def __post_init__(self) -> None:
        check = [
            (self.dataset_series > 0, "dataset_series must be positive"),
            (self.dataset_days > 0, "dataset_days must be positive"),
            (self.dataset_step > 0, "dataset_step must be positive"),
            (self.temp_k > 0 and self.temp_gamma > 0 and self.temp_t_heat > 0, "temperature parameters must be positive"),
            (self.window > 0, "window must be positive"),
            (self.capacity is None or self.capacity >= 0, "capacity must be non-negative"),
            (0 <= self.capacity_fraction <= 1, "capacity_fraction must be in [0, 1]"),
            (0 <= self.edge_fraction <= 1, "edge_fraction must be in [0, 1]"),
            (self.preheat_budget >= 0, "preheat_budget must be non-negative"),
            (self.summary_min_age >= 0, "summary_min_age must be non-negative"),
            (self.templates_per_kind > 0, "templates_per_kind must be positive"),
            (self.patterns in ("cycles", "mixed"), "patterns must be cycles or mixed"),
            (0 < self.recency_fraction < 1, "recency_fraction must be in (0, 1)"),
            (self.recency_within > 0, "recency_within must be positive"),
            (self.warmup_days >= 0 and self.measure_days > 0, "warmup_days >= 0 and measure_days > 0"),
            (self.cluster_rho > 0 and self.cluster_timeout > 0, "cluster_rho and cluster_timeout must be positive"),
            (self.forecast_lag > 0 and self.forecast_hidden > 0, "forecast_lag and forecast_hidden must be positive"),
            (self.forecast_horizon > 0 and self.forecast_refit > 0, "forecast_horizon and forecast_refit must be positive"),
            (self.freq_k >= 2 and self.freq_bucket > 0, "freq_k >= 2 and freq_bucket > 0"),
        ]
        for ok, msg in check:
            if not ok:
                raise ConfigError(msg)
        for p in self.policy_list():
            if p not in POLICIES:
                raise ConfigError(f"unknown policy {p!r}; expected one of {', '.join(POLICIES)}")
        try:
            self.duration_list()
            hz = self.eval_horizons()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if any(b <= a for a, b in zip(hz, hz[1:])):
            raise ConfigError("forecast_eval_horizons must be strictly increasing")

    def policy_list(self) -> list[str]:
        return [p.strip() for p in self.policies.split(",") if p.strip()]

    def duration_list(self) -> tuple[int, ...]:
        out = tuple(int(x) for x in self.durations.split(",") if x.strip())
        if not out or any(d < 0 for d in out):
            raise ValueError("durations must be a non-empty list of non-negative seconds")
        return out

    def eval_horizons(self) -> tuple[int, ...]:
        return tuple(int(x) for x in self.forecast_eval_horizons.split(",") if x.strip())

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, raw: str, annotation) -> object:
    raw = raw.strip()
    hint = annotation
    optional = False
    if isinstance(hint, types.UnionType) or typing.get_origin(hint) is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        optional, hint = True, args[0]
    if optional and raw.lower() in ("", "none"):
        return None
    try:
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected {hint.__name__}, got {raw!r}") from None
    return raw


_HINTS = typing.get_type_hints(ExperimentConfig)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    known = {f.name for f in fields(ExperimentConfig)}
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{n}: duplicate key {key!r}")
        out[key] = value
    return out


def build_config(values: Mapping[str, object]) -> ExperimentConfig:
    kw = {}
    for key, raw in values.items():
        if key not in _HINTS:
            raise ConfigError(f"unknown key {key!r}")
        kw[key] = _coerce(key, raw, _HINTS[key]) if isinstance(raw, str) else raw
    try:
        return ExperimentConfig(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load_config(path: str | Path | None = None, overrides: Mapping[str, object] | None = None) -> ExperimentConfig:
    values: dict[str, object] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        values.update(parse_config_text(p.read_text(), str(p)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = build_config(values)
    for key in ("dataset", "workload"):
        ref = getattr(cfg, key)
        if ref and not Path(ref).is_file():
            raise ConfigError(f"{key} file {ref} does not exist")
    return cfg


def replace(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return dataclasses.replace(cfg, **changes)
