"""Hashing-efficiency trend, worker-ID hardware classification and the
mining-pool cross-checks built on them."""

from __future__ import annotations

import datetime as dt
import json
import re
import statistics
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .records import (
    ETHEREUM_LAUNCH,
    BenchmarkRecord,
    HardwareTermTable,
    ValidationError,
    WorkerSnapshot,
)

MODEL_SCHEMA = "ethemissions.efficiency-model/v1"

# Worker hashrate buckets (MH/s): hobbyist single GPU, few-GPU, 6x GPU rigs and up.
BUCKET_EDGES = (100.0, 350.0)

LOW_EFFICIENCY_FLOOR = 1e-3  # MH/s/W


class FitError(ValueError):
    pass


def days_since_launch(day: dt.date) -> int:
    return (day - ETHEREUM_LAUNCH).days


@dataclass(frozen=True)
class EfficiencyModel:
    """Log-linear trend: ``log2(MH/s/W) = intercept + slope * days since launch``."""

    slope: float
    intercept: float
    band_mae: float
    window_start: dt.date
    window_end: dt.date

    def __post_init__(self):
        if self.band_mae < 0:
            raise ValidationError("band_mae must be nonnegative")
        if self.window_end < self.window_start:
            raise ValidationError("fit window is inverted")

    def best(self, day: dt.date) -> float:
        day = min(max(day, self.window_start), self.window_end)
        return 2.0 ** (self.intercept + self.slope * days_since_launch(day))

    def to_json(self) -> str:
        doc = {
            "schema": MODEL_SCHEMA,
            "slope": self.slope,
            "intercept": self.intercept,
            "band_mae": self.band_mae,
            "window_start": self.window_start.isoformat(),
            "window_end": self.window_end.isoformat(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EfficiencyModel":
        doc = json.loads(text)
        if doc.get("schema") != MODEL_SCHEMA:
            raise ValidationError(f"unsupported efficiency model schema {doc.get('schema')!r}")
        return cls(
            slope=float(doc["slope"]),
            intercept=float(doc["intercept"]),
            band_mae=float(doc["band_mae"]),
            window_start=dt.date.fromisoformat(doc["window_start"]),
            window_end=dt.date.fromisoformat(doc["window_end"]),
        )


@dataclass(frozen=True)
class HardwareProfile:
    canonical_hardware: str
    median_efficiency: float  # MH/s/W
    median_power: float  # W

    def __post_init__(self):
        if not self.median_efficiency > 0:
            raise ValidationError(f"{self.canonical_hardware}: efficiency must be positive")


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    slope = float(dx @ (y - ym)) / sxx
    return slope, float(ym - slope * xm)


def fit_efficiency_trend(benchmarks: Sequence[BenchmarkRecord], allow_flat: bool = False) -> EfficiencyModel:
    """Least-squares fit of log2 efficiency against release date.

    The band is the mean absolute difference, in MH/s/W, between the
    trendline and each benchmark. With ``allow_flat`` a nonpositive slope is
    returned instead of raising.
    """
    dates = sorted({b.release_date for b in benchmarks})
    if len(dates) < 2:
        raise FitError("degenerate fit: need benchmarks on at least 2 distinct release dates")
    x = np.array([days_since_launch(b.release_date) for b in benchmarks], dtype=float)
    eff = np.array([b.efficiency for b in benchmarks], dtype=float)
    slope, intercept = _ols(x, np.log2(eff))
    if slope <= 0 and not allow_flat:
        raise FitError(f"efficiency trend slope {slope:.3g} is not positive")
    trend = 2.0 ** (intercept + slope * x)
    mae = float(np.mean(np.abs(trend - eff)))
    return EfficiencyModel(slope, intercept, mae, dates[0], dates[-1])


def efficiency_at(model: EfficiencyModel, day: dt.date, floor: float = LOW_EFFICIENCY_FLOOR) -> tuple[float, float, float]:
    """(low, best, high) MH/s/W at ``day``, clamped to the fit window."""
    best = model.best(day)
    low = max(best - model.band_mae, min(floor, best))
    return low, best, best + model.band_mae


# -- worker IDs -------------------------------------------------------------


def classify_worker_id(worker_id: str, terms: HardwareTermTable) -> Optional[str]:
    """Canonical hardware named in a worker ID, or None.

    Case-insensitive substring match; the longest matching term wins and ties
    go to the match that starts earliest in the ID.
    """
    text = worker_id.lower()
    best = None  # (-len, position, canonical)
    for term, canonical in terms.rows:
        pos = text.find(term)
        if pos < 0:
            continue
        key = (-len(term), pos, canonical)
        if best is None or key < best:
            best = key
    return None if best is None else best[2]


def classify_hardware_name(name: str, terms: HardwareTermTable) -> Optional[str]:
    """Like :func:`classify_worker_id` but for marketing names such as "RTX 3060 Ti"."""
    return classify_worker_id(re.sub(r"[\s\-_]+", "", name), terms)


def hardware_profiles(benchmarks: Iterable[BenchmarkRecord], terms: HardwareTermTable) -> dict[str, HardwareProfile]:
    """Median efficiency and power per canonical hardware name."""
    groups: dict[str, list[BenchmarkRecord]] = {}
    for b in benchmarks:
        name = classify_hardware_name(b.hardware_name, terms)
        if name is not None:
            groups.setdefault(name, []).append(b)
    return {
        name: HardwareProfile(
            name,
            statistics.median(b.efficiency for b in rows),
            statistics.median(b.power for b in rows),
        )
        for name, rows in sorted(groups.items())
    }


def weighted_efficiency(items: Iterable[tuple[float, float]]) -> float:
    """Hashrate-weighted mean efficiency of ``(weight, efficiency)`` pairs.

    HiveOS-style shares work the same way: pass model share x per-model
    hashrate as the weight.
    """
    items = list(items)
    total = sum(w for w, _ in items)
    if any(w < 0 for w, _ in items):
        raise ValueError("weights must be nonnegative")
    if not total > 0:
        raise ValueError("weighted_efficiency needs at least one positive weight")
    value = sum(w * e for w, e in items) / total
    lo, hi = min(e for w, e in items if w > 0), max(e for w, e in items if w > 0)
    return min(max(value, lo), hi)


def worker_power_estimate(reported_hashrate: float, profile: HardwareProfile) -> float:
    """GPU-reported power (W) implied by a worker's hashrate and its hardware."""
    return reported_hashrate / profile.median_efficiency


def identified_workers(snapshot: Iterable[WorkerSnapshot], terms: HardwareTermTable, profiles: dict[str, HardwareProfile]):
    """Yield ``(worker, profile)`` for workers whose ID names profiled hardware."""
    for w in snapshot:
        name = classify_worker_id(w.worker_id, terms)
        if name is not None and name in profiles and w.reported_hashrate > 0:
            yield w, profiles[name]


def snapshot_efficiency(snapshot, terms, profiles) -> float:
    """Hashrate-weighted efficiency over identifiable workers."""
    return weighted_efficiency((w.reported_hashrate, p.median_efficiency) for w, p in identified_workers(snapshot, terms, profiles))


def median_worker_power(snapshot, terms, profiles) -> float:
    """Median GPU-reported power across identifiable workers."""
    powers = [worker_power_estimate(w.reported_hashrate, p) for w, p in identified_workers(snapshot, terms, profiles)]
    if not powers:
        raise ValueError("no identifiable workers in snapshot")
    return statistics.median(powers)


@dataclass(frozen=True)
class HashrateDistribution:
    bin_edges: np.ndarray  # MH/s
    counts: np.ndarray  # workers per bin
    hashrate: np.ndarray  # summed MH/s per bin
    bucket_shares: tuple[float, float, float]  # hashrate share below/between/above BUCKET_EDGES
    worker_shares: tuple[float, float, float]

    def peaks(self, min_separation: float = 50.0) -> list[float]:
        """Bin centres of local maxima in worker count, strongest first."""
        c = self.counts
        centres = (self.bin_edges[:-1] + self.bin_edges[1:]) / 2
        idx = [
            i
            for i in range(len(c))
            if c[i] > 0 and (i == 0 or c[i] >= c[i - 1]) and (i == len(c) - 1 or c[i] > c[i + 1])
        ]
        idx.sort(key=lambda i: -c[i])
        chosen: list[float] = []
        for i in idx:
            if all(abs(centres[i] - p) >= min_separation for p in chosen):
                chosen.append(float(centres[i]))
        return chosen


def hashrate_distribution(
    snapshot: Sequence[WorkerSnapshot], bin_width: float = 10.0, edges: tuple[float, float] = BUCKET_EDGES
) -> HashrateDistribution:
    if not snapshot:
        raise ValueError("empty snapshot")
    rates = np.array([w.reported_hashrate for w in snapshot], dtype=float)
    total = rates.sum()
    if not total > 0:
        raise ValueError("snapshot has zero total hashrate")
    top = max(bin_width, np.ceil((rates.max() + 1e-9) / bin_width) * bin_width)
    bins = np.arange(0.0, top + bin_width, bin_width)
    counts, _ = np.histogram(rates, bins=bins)
    summed, _ = np.histogram(rates, bins=bins, weights=rates)
    lo, hi = edges
    masks = (rates < lo, (rates >= lo) & (rates < hi), rates >= hi)
    shares = tuple(float(rates[m].sum() / total) for m in masks)
    workers = tuple(float(m.sum() / len(rates)) for m in masks)
    return HashrateDistribution(bins, counts, summed, shares, workers)
