"""Regional emissions factors and block -> region -> grid attribution.

Blocks are mapped first by their decoded ``extraData`` against an ordered
pattern table, then by the mining pool that owns the miner address; the
resulting region mix is expanded to electric grids and averaged over the
grid emissions factors for the block's calendar year.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .ingestion import format_distribution, parse_distribution
from .records import (
    BlockRecord,
    Distribution,
    EmissionsFactorTable,
    PatternTable,
    PoolRegionTable,
    RegionGridMap,
    normalize_weights,
)

KG_PER_SHORT_TON = 907.18474  # 2000 lb
MASS_UNITS_KG = {"tonne": 1000.0, "short_ton": KG_PER_SHORT_TON}

METHODS = ("extra_data", "pool", "unmapped")
FACTOR_FLOOR = 1.0  # gCO2/kWh


def mix_emission_factor(sources: Iterable[tuple[float, float]], total_generation: float) -> float:
    """Generation-weighted factor of ``(TWh, gCO2/kWh)`` sources over the whole grid.

    Generation not covered by ``sources`` counts as zero-emission.
    """
    sources = list(sources)
    covered = sum(g for g, _ in sources)
    if not covered > 0:
        raise ValueError("source generation must be positive")
    if total_generation < covered * (1 - 1e-12):
        raise ValueError(f"total generation {total_generation} is below the source sum {covered}")
    return sum(g * f for g, f in sources) / total_generation


def generation_based_factor(total_emissions: float, total_generation_twh: float, unit: str = "short_ton") -> float:
    """gCO2/kWh from total CO2 mass (in ``unit``) over total generation in TWh."""
    if unit not in MASS_UNITS_KG:
        raise ValueError(f"unknown mass unit {unit!r}; expected one of {sorted(MASS_UNITS_KG)}")
    if not total_generation_twh > 0:
        raise ValueError("total generation must be positive")
    if not total_emissions > 0:
        raise ValueError("total emissions must be positive")
    grams = total_emissions * MASS_UNITS_KG[unit] * 1e3
    return grams / (total_generation_twh * 1e9)


def scaled_fossil_factor(fossil_share: float, fossil_factor: float) -> float:
    """Factor of a grid whose only emitting source is a fossil share (e.g. wet-season hydro grids)."""
    if not 0 <= fossil_share <= 1:
        raise ValueError("fossil share must be in [0, 1]")
    return fossil_share * fossil_factor


def fossil_factor_from_total(total_factor: float, fossil_share: float) -> float:
    """Back out the fossil-only factor from a grid factor and its fossil share."""
    if not 0 < fossil_share <= 1:
        raise ValueError("fossil share must be in (0, 1]")
    return total_factor / fossil_share


def fit_line(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float(dx @ (y - ym)) / float(dx @ dx)
    return slope, float(ym - slope * xm)


def extend_factor_series(
    known: Sequence[tuple[int, float]], target_years: Iterable[int], floor: float = FACTOR_FLOOR
) -> list[tuple[int, float, str]]:
    """Complete a yearly factor series with a least-squares line.

    Returns ``(year, value, provenance)`` sorted by year. Known years keep
    their value and are tagged ``"known"``; filled years are tagged
    ``"interpolated"`` and floored at ``floor``.
    """
    known = sorted(dict(known).items())
    if len(known) < 2:
        raise ValueError("need at least 2 known points to fit a line")
    slope, intercept = fit_line([y for y, _ in known], [v for _, v in known])
    values = dict(known)
    out = {year: (year, float(v), "known") for year, v in known}
    for year in target_years:
        if year not in values:
            out[year] = (year, max(floor, intercept + slope * year), "interpolated")
    return [out[y] for y in sorted(out)]


def grid_mix(region_mix: Iterable[tuple[str, float]], region_map: RegionGridMap) -> Distribution:
    """Expand a region mix to normalized grid weights."""
    weights: dict[str, float] = {}
    for region, rw in normalize_weights(region_mix, "region mix"):
        if region not in region_map:
            raise KeyError(f"unknown region {region!r}")
        for grid, gw in region_map[region]:
            weights[grid] = weights.get(grid, 0.0) + rw * gw
    return tuple(sorted(weights.items()))


def grid_mix_factor(
    region_mix: Iterable[tuple[str, float]], region_map: RegionGridMap, factors: EmissionsFactorTable, year: int
) -> float:
    """Weighted-average gCO2/kWh of the grids behind a region mix in ``year``."""
    total = 0.0
    for grid, weight in grid_mix(region_mix, region_map):
        if (grid, year) not in factors.entries:
            raise KeyError(f"missing emissions factor for ({grid!r}, {year})")
        total += weight * factors.entries[(grid, year)]
    return total


@dataclass(frozen=True)
class BlockAttribution:
    height: int
    method: str
    region_mix: Distribution = ()
    emissions_factor: Optional[float] = None
    day: Optional[dt.date] = None  # UTC

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown attribution method {self.method!r}")
        if (self.method == "unmapped") != (self.emissions_factor is None):
            raise ValueError("unmapped attributions carry no factor and mapped ones must")


class Attributor:
    """Holds the lookup tables and memoizes factor lookups per (mix, year)."""

    def __init__(
        self,
        patterns: PatternTable,
        pools: PoolRegionTable,
        miner_to_pool: Mapping[str, str],
        region_map: RegionGridMap,
        factors: EmissionsFactorTable,
    ):
        self.patterns = patterns
        self.pools = pools
        self.miner_to_pool = {k.lower(): v for k, v in miner_to_pool.items()}
        self.region_map = region_map
        self.factors = factors
        self._factor = lru_cache(maxsize=None)(self._mix_factor)

    def _mix_factor(self, mix: Distribution, year: int) -> float:
        return grid_mix_factor(mix, self.region_map, self.factors, year)

    def region_mix(self, block: BlockRecord) -> tuple[str, Distribution]:
        region = self.patterns.match(block.extra_data) if block.extra_data else None
        if region is not None:
            return "extra_data", ((region, 1.0),)
        pool = self.miner_to_pool.get(block.miner.lower())
        if pool is not None and pool in self.pools:
            return "pool", tuple(self.pools[pool])
        return "unmapped", ()

    def attribute(self, block: BlockRecord) -> BlockAttribution:
        method, mix = self.region_mix(block)
        factor = None if method == "unmapped" else self._factor(mix, block.day.year)
        return BlockAttribution(block.height, method, mix, factor, block.day)

    def attribute_all(self, blocks: Iterable[BlockRecord]) -> list[BlockAttribution]:
        return sorted((self.attribute(b) for b in blocks), key=lambda a: a.height)


def classify_block(
    block: BlockRecord,
    patterns: PatternTable,
    pools: PoolRegionTable,
    miner_to_pool: Mapping[str, str],
    region_map: RegionGridMap,
    factors: EmissionsFactorTable,
) -> BlockAttribution:
    """Attribute one block: extraData pattern first, then mining pool, else unmapped."""
    return Attributor(patterns, pools, miner_to_pool, region_map, factors).attribute(block)


def coverage(attributions: Sequence[BlockAttribution]) -> dict[str, float]:
    """Fraction of blocks per attribution method; the fractions sum to 1."""
    n = len(attributions)
    if n == 0:
        raise ValueError("no attributions")
    counts = {m: 0 for m in METHODS}
    for a in attributions:
        counts[a.method] += 1
    return {m: c / n for m, c in counts.items()}


ATTRIBUTION_HEADER = ["height", "method", "region_mix", "gco2_per_kwh", "date"]


def dump_attributions(attributions: Sequence[BlockAttribution], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ATTRIBUTION_HEADER)
    for a in sorted(attributions, key=lambda a: a.height):
        factor = "" if a.emissions_factor is None else repr(float(a.emissions_factor))
        day = "" if a.day is None else a.day.isoformat()
        w.writerow([a.height, a.method, format_distribution(a.region_mix, digits=6), factor, day])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_attributions(path) -> list[BlockAttribution]:
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for row in reader:
            factor = float(row["gco2_per_kwh"]) if row["gco2_per_kwh"] else None
            mix = tuple(parse_distribution(row["region_mix"]))
            day = dt.date.fromisoformat(row["date"]) if row.get("date") else None
            out.append(BlockAttribution(int(row["height"]), row["method"], mix, factor, day))
    return sorted(out, key=lambda a: a.height)
