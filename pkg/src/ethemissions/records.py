"""Typed data model shared by the loaders, the estimators and the CLI.

All records and tables are immutable once constructed so they can be shared
freely between threads.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Mapping, Optional

ETHEREUM_LAUNCH = dt.date(2015, 7, 30)

HASHRATE_SOURCES = ("etherscan", "coinwarz", "other")

PROVENANCE_TAGS = ("government", "energy_mix", "interpolated", "third_party")

# Electric grids with a factor row in the shipped table, in table order.
GRIDS = (
    "Asia",
    "Singapore",
    "Taiwan",
    "South Korea",
    "China",
    "China (Northwest)",
    "China (South)",
    "Europe",
    "Sweden",
    "Netherlands",
    "Germany",
    "Russia",
    "Ukraine",
    "United States",
    "United States (East)",
    "United States (West)",
)

# Closed set of region labels produced by extraData patterns and pool tables.
REGIONS = (
    "asia",
    "singapore",
    "taiwan",
    "seoul",
    "china",
    "europe",
    "europe-west",
    "europe-north",
    "russia",
    "ukraine",
    "us",
    "us-east",
    "us-west",
)

Distribution = tuple[tuple[str, float], ...]


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


@dataclass(frozen=True)
class HashrateSample:
    date: dt.date
    network_hashrate: float  # TH/s
    source: str = "etherscan"

    def __post_init__(self):
        if not self.network_hashrate > 0:
            raise ValidationError("hashrate must be positive")
        if self.source not in HASHRATE_SOURCES:
            raise ValidationError(f"unknown hashrate source {self.source!r}")


@dataclass(frozen=True)
class BlockRecord:
    height: int
    timestamp: int  # unix seconds, UTC
    miner: str
    extra_data: str
    raw_extra_data: bytes = b""

    def __post_init__(self):
        if len(self.raw_extra_data) > 32:
            raise ValidationError("extraData exceeds 32 bytes")

    @property
    def time(self) -> dt.datetime:
        return dt.datetime.fromtimestamp(self.timestamp, tz=dt.timezone.utc)

    @property
    def day(self) -> dt.date:
        return self.time.date()


@dataclass(frozen=True)
class BenchmarkRecord:
    hardware_name: str
    release_date: dt.date
    hashrate: float  # MH/s
    power: float  # W, GPU-reported
    source: str = ""

    def __post_init__(self):
        if not self.hashrate > 0:
            raise ValidationError(f"{self.hardware_name}: hashrate must be positive")
        if not self.power > 0:
            raise ValidationError(f"{self.hardware_name}: power must be positive")
        if not 0 < self.efficiency < 2:
            raise ValidationError(
                f"{self.hardware_name}: efficiency {self.efficiency:.3f} MH/s/W outside (0, 2)"
            )

    @property
    def efficiency(self) -> float:
        return self.hashrate / self.power


@dataclass(frozen=True)
class WorkerSnapshot:
    snapshot_date: dt.date
    worker_id: str
    reported_hashrate: float  # MH/s

    def __post_init__(self):
        if self.reported_hashrate < 0:
            raise ValidationError(f"{self.worker_id}: negative hashrate")


def normalize_weights(pairs, what: str = "distribution") -> Distribution:
    """Normalize ``(label, weight)`` pairs to sum to one, dropping zero weights."""
    pairs = list(pairs)
    for label, weight in pairs:
        if weight < 0:
            raise ValidationError(f"negative weight for {label!r} in {what}")
    total = sum(w for _, w in pairs)
    if not total > 0:
        raise ValidationError(f"empty distribution in {what}")
    merged: dict[str, float] = {}
    for label, weight in pairs:
        if weight > 0:
            merged[label] = merged.get(label, 0.0) + weight
    # a weight can underflow to zero once divided by the total; drop it too
    return tuple((label, w / total) for label, w in merged.items() if w / total > 0)


@dataclass(frozen=True)
class EmissionsFactorTable:
    """Grid x year matrix of gCO2/kWh with a provenance tag per entry."""

    entries: Mapping[tuple[str, int], float]
    provenance: Mapping[tuple[str, int], Optional[str]] = field(default_factory=dict)

    def __post_init__(self):
        for key, value in self.entries.items():
            if not 0 < value < 1200:
                raise ValidationError(f"factor {value} for {key} outside (0, 1200)")
        for key, tag in self.provenance.items():
            if tag is not None and tag not in PROVENANCE_TAGS:
                raise ValidationError(f"unknown provenance {tag!r} for {key}")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))

    def factor(self, grid: str, year: int) -> float:
        try:
            return self.entries[(grid, year)]
        except KeyError:
            raise KeyError(f"no emissions factor for ({grid!r}, {year})") from None

    @property
    def grids(self) -> tuple[str, ...]:
        return tuple(sorted({g for g, _ in self.entries}))

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(sorted({y for _, y in self.entries}))

    def provenance_shares(self) -> dict[str, float]:
        counts: dict[str, int] = {}
        for key in self.entries:
            tag = self.provenance.get(key) or "unknown"
            counts[tag] = counts.get(tag, 0) + 1
        n = len(self.entries)
        return {tag: c / n for tag, c in sorted(counts.items())}


@dataclass(frozen=True)
class _WeightedRows:
    rows: Mapping[str, Distribution]
    raw: Mapping[str, Distribution] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        raw = {k: tuple((label, float(w)) for label, w in v) for k, v in self.rows.items()}
        rows = {k: normalize_weights(v, k) for k, v in raw.items()}
        object.__setattr__(self, "raw", MappingProxyType(raw))
        object.__setattr__(self, "rows", MappingProxyType(rows))

    def __getitem__(self, key: str) -> Distribution:
        return self.rows[key]

    def __contains__(self, key) -> bool:
        return key in self.rows

    def __len__(self) -> int:
        return len(self.rows)


class RegionGridMap(_WeightedRows):
    """Region label -> normalized (grid, weight) pairs."""


class PoolRegionTable(_WeightedRows):
    """Mining pool name -> normalized (region, weight) pairs."""


@dataclass(frozen=True)
class PatternTable:
    """Ordered extraData regexes; the first matching pattern decides the region."""

    rows: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple((p, r) for p, r in self.rows))
        for pattern, _ in self.rows:
            try:
                re.compile(pattern)
            except re.error as exc:
                raise ValidationError(f"pattern {pattern!r} does not compile: {exc}") from None

    @cached_property
    def compiled(self) -> tuple[tuple[re.Pattern, str], ...]:
        return tuple((re.compile(p, re.IGNORECASE), r) for p, r in self.rows)

    def match(self, text: str) -> Optional[str]:
        for regex, region in self.compiled:
            if regex.search(text):
                return region
        return None


@dataclass(frozen=True)
class HardwareTermTable:
    rows: tuple[tuple[str, str], ...]  # (term, canonical hardware)

    def __post_init__(self):
        rows = tuple(sorted((t, c) for t, c in self.rows))
        if any(not t for t, _ in rows):
            raise ValidationError("empty hardware term")
        object.__setattr__(self, "rows", rows)

    @property
    def canonical_names(self) -> tuple[str, ...]:
        return tuple(sorted({c for _, c in self.rows}))
