"""Pollution-style sensor data: a synthetic generator and a CSV ingester."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from ..scheduler import DataSummary, summarize_overcooled
from ..workload import Schema

log = logging.getLogger(__name__)

FIELDS = ("ozone", "particullate_matter", "carbon_monoxide", "sulfure_dioxide", "nitrogen_dioxide")
TAGS = ("longitude", "latitude")
TIMESTAMP = "timestamp"
# 2014-08-01T00:00:00Z
DEFAULT_START = 1406851200
MAX_MALFORMED_FRACTION = 0.01


class IngestError(ValueError):
    pass


@dataclass
class SeriesStore:
    """Points grouped into series by their tag values, each series sorted by time.

    ``summaries`` holds segments whose raw points were released; their
    points stay counted in ``grid`` so capacity accounting is unaffected.
    """

    schema: Schema
    timestamps: list[np.ndarray]
    values: list[np.ndarray]
    rows: int = 0
    malformed: int = 0
    summaries: dict[tuple[int, int], tuple[DataSummary, ...]] = field(default_factory=dict)

    @property
    def n_series(self) -> int:
        return len(self.timestamps)

    @property
    def n_points(self) -> int:
        return int(sum(t.size for t in self.timestamps))

    @property
    def start(self) -> int:
        return int(min(t[0] for t in self.timestamps if t.size))

    @property
    def end(self) -> int:
        return int(max(t[-1] for t in self.timestamps if t.size))

    def grid(self, bucket_len: int) -> tuple[int, np.ndarray]:
        """``(first_bucket, counts)`` with ``counts[s, b]`` points of series s in bucket ``first_bucket + b``."""
        first = self.start // bucket_len
        n = self.end // bucket_len - first + 1
        counts = np.zeros((self.n_series, n), dtype=np.int64)
        for s, ts in enumerate(self.timestamps):
            np.add.at(counts[s], ts // bucket_len - first, 1)
        return first, counts

    def segment(self, series: int, bucket: int, bucket_len: int) -> np.ndarray:
        """Raw points (rows of field values) of absolute bucket ``bucket``."""
        if (series, bucket) in self.summaries:
            raise LookupError(f"segment ({series}, {bucket}) was summarized")
        ts = self.timestamps[series]
        lo, hi = np.searchsorted(ts, [bucket * bucket_len, (bucket + 1) * bucket_len])
        return self.values[series][lo:hi]

    def summarize(self, series: int, bucket: int, bucket_len: int) -> tuple[DataSummary, ...]:
        """Replace a segment's raw points by per-field summaries; repeating it changes nothing."""
        done = self.summaries.get((series, bucket))
        if done is not None:
            return done
        pts = self.segment(series, bucket, bucket_len)
        if pts.shape[0] == 0:
            return ()
        out = tuple(summarize_overcooled(pts[:, f], series, bucket) for f in range(pts.shape[1]))
        self.summaries[(series, bucket)] = out
        return out


def synthetic_store(
    n_series: int = 8,
    days: int = 90,
    step: int = 300,
    start: int = DEFAULT_START,
    seed: int = 0,
) -> SeriesStore:
    """Sensor readings with a daily cycle, slow drift and noise, one row per ``step`` per sensor."""
    rng = np.random.default_rng(seed)
    ts = np.arange(start, start + days * 86400, step, dtype=np.int64)
    phase = 2 * math.pi * (ts - start) / 86400.0
    locations = []
    timestamps, values = [], []
    for s in range(n_series):
        lon = round(10.10 + 0.01 * s + float(rng.uniform(0, 0.005)), 6)
        lat = round(56.15 + 0.01 * s + float(rng.uniform(0, 0.005)), 6)
        locations.append((f"{lon:.6f}", f"{lat:.6f}"))
        base = rng.uniform(40, 120, size=len(FIELDS))
        amp = rng.uniform(5, 30, size=len(FIELDS))
        shift = rng.uniform(0, 2 * math.pi, size=len(FIELDS))
        cols = [
            base[f] + amp[f] * np.sin(phase + shift[f]) + rng.normal(0, 3, size=ts.size) for f in range(len(FIELDS))
        ]
        timestamps.append(ts.copy())
        values.append(np.round(np.clip(np.stack(cols, axis=1), 0, None), 2))
    schema = Schema("pollution", FIELDS, TAGS, tuple(locations), TIMESTAMP)
    return SeriesStore(schema, timestamps, values, rows=n_series * ts.size)


def write_csv(store: SeriesStore, path: str | Path) -> None:
    """Write rows interleaved by time, as a sensor feed would deliver them."""
    schema = store.schema
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((*schema.fields, *schema.tags, schema.timestamp))
        n = store.timestamps[0].size
        for i in range(n):
            for s in range(store.n_series):
                if i >= store.timestamps[s].size:
                    continue
                stamp = datetime.fromtimestamp(int(store.timestamps[s][i]), tz=timezone.utc)
                vals = [f"{v:g}" for v in store.values[s][i]]
                w.writerow((*vals, *schema.series[s], stamp.strftime("%Y-%m-%d %H:%M:%S")))


def parse_timestamp(text: str) -> int:
    """Epoch seconds or ISO-8601 (naive times are taken as UTC)."""
    text = text.strip()
    try:
        return int(float(text))
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def ingest_csv(
    path: str | Path,
    tags: Sequence[str] = TAGS,
    fields: Sequence[str] | None = None,
    timestamp: str = TIMESTAMP,
    measurement: str = "pollution",
    max_malformed: float = MAX_MALFORMED_FRACTION,
) -> SeriesStore:
    """Load a CSV with a header row into a :class:`SeriesStore`.

    ``fields`` defaults to every column that is neither a tag nor the
    timestamp.  Rows with the wrong column count, an unparseable timestamp
    or a non-numeric field are skipped and counted; more than
    ``max_malformed`` of them aborts the load.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if timestamp not in header:
            raise IngestError(f"{path}: no {timestamp!r} column in header {header}")
        missing = [t for t in tags if t not in header]
        if missing:
            raise IngestError(f"{path}: missing tag columns {missing}")
        if fields is None:
            fields = [h for h in header if h not in tags and h != timestamp]
        if not fields:
            raise IngestError(f"{path}: no field columns")
        ti = header.index(timestamp)
        tag_i = [header.index(t) for t in tags]
        field_i = [header.index(f) for f in fields]

        keys: dict[tuple[str, ...], int] = {}
        ts_rows: list[list[int]] = []
        val_rows: list[list[list[float]]] = []
        rows = bad = 0
        for row in reader:
            if not row:
                continue
            rows += 1
            try:
                if len(row) != len(header):
                    raise ValueError("column count")
                t = parse_timestamp(row[ti])
                vals = [float(row[i]) for i in field_i]
                if not all(map(math.isfinite, vals)):
                    raise ValueError("non-finite value")
            except ValueError:
                bad += 1
                continue
            key = tuple(row[i].strip() for i in tag_i)
            sid = keys.get(key)
            if sid is None:
                sid = keys[key] = len(keys)
                ts_rows.append([])
                val_rows.append([])
            ts_rows[sid].append(t)
            val_rows[sid].append(vals)
    if rows and bad / rows > max_malformed:
        raise IngestError(f"{path}: {bad} of {rows} rows malformed ({bad / rows:.1%} > {max_malformed:.0%})")
    if not keys:
        raise IngestError(f"{path}: no valid rows")
    # series ids follow sorted tag values so they do not depend on row order
    order = sorted(keys, key=lambda k: k)
    timestamps, values = [], []
    for key in order:
        sid = keys[key]
        ts = np.asarray(ts_rows[sid], dtype=np.int64)
        vals = np.asarray(val_rows[sid], dtype=float).reshape(-1, len(fields))
        perm = np.argsort(ts, kind="stable")
        timestamps.append(ts[perm])
        values.append(vals[perm])
    if bad:
        log.warning("%s: skipped %d malformed rows of %d", path, bad, rows)
    schema = Schema(measurement, tuple(fields), tuple(tags), tuple(order), timestamp)
    return SeriesStore(schema, timestamps, values, rows=rows, malformed=bad)
