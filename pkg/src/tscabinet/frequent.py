"""Frequent access timestamps via the Misra-Gries summary.

Query ranges are cut into bucket indices and the resulting stream is
summarised in a table of at most ``k - 1`` counters.  Every bucket seen more
than ``m / k`` times survives, and each surviving counter under-estimates
its true count by at most ``m / k``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .workload import Query

DEFAULT_K = 64
DEFAULT_BUCKET = 300


def expand_query_to_timestamps(query: Query, bucket_len: int = DEFAULT_BUCKET) -> range:
    """Indices of every bucket that overlaps ``[t_start, t_end]`` (both ends inclusive)."""
    return expand_range(query.t_start, query.t_end, bucket_len)


def expand_range(lo: int, hi: int, bucket_len: int = DEFAULT_BUCKET) -> range:
    """Bucket indices overlapping ``[lo, hi]``; also used for ranges of ages rather than times."""
    if bucket_len <= 0:
        raise ValueError("bucket length must be positive")
    return range(lo // bucket_len, hi // bucket_len + 1)


@dataclass
class CounterTable:
    k: int = DEFAULT_K
    entries: dict[int, int] = field(default_factory=dict)
    processed: int = 0

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("k must be at least 2")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, item: int) -> bool:
        return item in self.entries


def mg_process(table: CounterTable, element: int) -> CounterTable:
    """One Misra-Gries step (mutates and returns ``table``)."""
    table.processed += 1
    entries = table.entries
    if element in entries:
        entries[element] += 1
    elif len(entries) < table.k - 1:
        entries[element] = 1
    else:
        for key in list(entries):
            c = entries[key] - 1
            if c:
                entries[key] = c
            else:
                del entries[key]
    return table


def mg_extend(table: CounterTable, stream: Iterable[int]) -> CounterTable:
    for x in stream:
        mg_process(table, x)
    return table


def mg_run(stream: Iterable[int], k: int = DEFAULT_K) -> CounterTable:
    return mg_extend(CounterTable(k), stream)


@dataclass(frozen=True)
class FrequencyEstimate:
    """A surviving bucket; its true count lies in ``[estimate, estimate + max_error]``."""

    bucket: int
    estimate: int
    max_error: float

    @property
    def lower_bound(self) -> int:
        return self.estimate

    @property
    def upper_bound(self) -> float:
        return self.estimate + self.max_error


def frequent_buckets(table: CounterTable, m: int, k: int | None = None) -> list[FrequencyEstimate]:
    """Table entries with their error bound, largest estimate first (ties: lower bucket first)."""
    if m < 0:
        raise ValueError("stream length must be non-negative")
    k = table.k if k is None else k
    eps_m = m / k
    items = sorted(table.entries.items(), key=lambda kv: (-kv[1], kv[0]))
    return [FrequencyEstimate(b, c, eps_m) for b, c in items]


REPORT_HEADER = ("bucket_start_ts", "counter", "lower_bound")


def write_frequent_report(
    estimates: Sequence[FrequencyEstimate], path: str | Path, bucket_len: int = DEFAULT_BUCKET
) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for e in estimates:
            w.writerow((e.bucket * bucket_len, e.estimate, e.lower_bound))


def read_frequent_report(path: str | Path, bucket_len: int = DEFAULT_BUCKET) -> list[tuple[int, int, int]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != REPORT_HEADER:
        raise ValueError(f"{path}: not a frequent-bucket report")
    return [(int(a) // bucket_len, int(b), int(c)) for a, b, c in rows[1:]]
