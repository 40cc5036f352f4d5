"""Daily energy and emissions series with low/best/high bounds."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .efficiency import EfficiencyModel, efficiency_at
from .emissions import BlockAttribution
from .energy import DEFAULT_SCENARIOS, HOURS_PER_YEAR, ScenarioSet, annualize, scenario_triple
from .records import HashrateSample

Triple = tuple[float, float, float]

DAILY_COLUMNS = [
    "date",
    "hashrate_ths",
    "eff_low",
    "eff_best",
    "eff_high",
    "power_w_low",
    "power_w_best",
    "power_w_high",
    "energy_kwh_low",
    "energy_kwh_best",
    "energy_kwh_high",
    "factor_gco2_kwh",
    "emissions_t_low",
    "emissions_t_best",
    "emissions_t_high",
    "mapped_blocks",
    "unmapped_blocks",
]

REPORT_START = dt.date(2015, 7, 15)


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class DailyEstimate:
    date: dt.date
    hashrate: float  # TH/s
    efficiency: Triple  # MH/s/W
    power: Triple  # W
    energy: Triple  # kWh
    network_factor: float  # gCO2/kWh
    emissions: Triple  # tCO2
    mapped_block_count: int = 0
    unmapped_block_count: int = 0

    def row(self) -> list:
        return [
            self.date.isoformat(),
            self.hashrate,
            *self.efficiency,
            *self.power,
            *self.energy,
            self.network_factor,
            *self.emissions,
            self.mapped_block_count,
            self.unmapped_block_count,
        ]


@dataclass(frozen=True)
class RunSummary:
    start: dt.date
    end: dt.date
    energy_twh: Triple
    emissions_mt: Triple
    peak_power_date: dt.date
    peak_power_w: Triple
    peak_emissions_date: dt.date
    peak_emissions_t: Triple
    days: int
    hours_per_year: float = HOURS_PER_YEAR

    def to_dict(self) -> dict:
        lbh = ("low", "best", "high")
        return {
            "date_range": [self.start.isoformat(), self.end.isoformat()],
            "days": self.days,
            "total_energy_twh": dict(zip(lbh, self.energy_twh)),
            "total_emissions_mtco2": dict(zip(lbh, self.emissions_mt)),
            "peak_power": {
                "date": self.peak_power_date.isoformat(),
                "w": dict(zip(lbh, self.peak_power_w)),
                "annualized_twh_per_year": dict(
                    zip(lbh, (annualize(p, self.hours_per_year) for p in self.peak_power_w))
                ),
            },
            "peak_emissions": {
                "date": self.peak_emissions_date.isoformat(),
                "tco2_per_day": dict(zip(lbh, self.peak_emissions_t)),
            },
        }


@dataclass(frozen=True)
class PipelineConfig:
    scenarios: ScenarioSet = DEFAULT_SCENARIOS
    hours_per_year: float = HOURS_PER_YEAR
    smoothing_days: int = 21
    start: Optional[dt.date] = None
    end: Optional[dt.date] = None
    fixed_factor: Optional[float] = None
    report_start: dt.date = REPORT_START
    workers: int = 1

    def fingerprint_dict(self) -> dict:
        s = self.scenarios
        return {
            "scenarios": {
                name: vars(getattr(s, name)).copy() for name in ("low", "best", "high")
            },
            "hours_per_year": self.hours_per_year,
            "smoothing_days": self.smoothing_days,
            "start": self.start and self.start.isoformat(),
            "end": self.end and self.end.isoformat(),
            "fixed_factor": self.fixed_factor,
            "report_start": self.report_start.isoformat(),
        }


@dataclass
class RunResult:
    daily: list[DailyEstimate]
    summary: RunSummary
    config: PipelineConfig = field(default_factory=PipelineConfig)


# -- network emissions factor -----------------------------------------------


def daily_network_factor(attributions: Iterable[BlockAttribution]) -> Optional[float]:
    """Unweighted mean factor over the mapped blocks of one day."""
    values = [a.emissions_factor for a in attributions if a.emissions_factor is not None]
    if not values:
        return None
    return math.fsum(values) / len(values)


def smooth_early_window(
    series: Mapping[dt.date, Optional[float]], window: tuple[dt.date, dt.date]
) -> dict[dt.date, Optional[float]]:
    """Replace every value in ``[start, end]`` with the median of the window's values."""
    start, end = window
    inside = [d for d in series if start <= d <= end]
    values = [series[d] for d in inside if series[d] is not None]
    out = dict(series)
    if not values:
        return out
    med = statistics.median(values)
    for d in inside:
        out[d] = med
    return out


def daily_factor_series(
    attributions: Sequence[BlockAttribution], smoothing_days: int = 21
) -> dict[dt.date, tuple[Optional[float], int, int]]:
    """Per UTC day: (mean factor or None, mapped count, unmapped count)."""
    by_day: dict[dt.date, list[BlockAttribution]] = {}
    for a in attributions:
        if a.day is None:
            raise PipelineError(f"attribution for block {a.height} has no date")
        by_day.setdefault(a.day, []).append(a)
    if not by_day:
        return {}
    factors = {d: daily_network_factor(rows) for d, rows in by_day.items()}
    if smoothing_days > 0:
        first = min(by_day)
        factors = smooth_early_window(factors, (first, first + dt.timedelta(days=smoothing_days - 1)))
    out = {}
    for d in sorted(by_day):
        mapped = sum(1 for a in by_day[d] if a.method != "unmapped")
        out[d] = (factors[d], mapped, len(by_day[d]) - mapped)
    return out


# -- pipeline ----------------------------------------------------------------


def _day_estimate(sample: HashrateSample, factor: float, mapped: int, unmapped: int, model, config) -> DailyEstimate:
    eff = efficiency_at(model, sample.date)
    est = scenario_triple(sample.network_hashrate, eff, config.scenarios, sample.date, config.hours_per_year)
    emissions = tuple(e * factor / 1e6 for e in est.energy)
    return DailyEstimate(sample.date, sample.network_hashrate, eff, est.power, est.energy, factor, emissions, mapped, unmapped)


def run_pipeline(
    hashrate: Sequence[HashrateSample],
    model: EfficiencyModel,
    attributions: Optional[Sequence[BlockAttribution]] = None,
    config: PipelineConfig = PipelineConfig(),
) -> RunResult:
    """Estimate every day of the hashrate series that the inputs cover.

    Days without mapped blocks reuse the last available factor. With
    ``config.fixed_factor`` set, block attributions are not needed.
    """
    samples = sorted(hashrate, key=lambda s: s.date)
    if config.start is not None:
        samples = [s for s in samples if s.date >= config.start]
    if config.end is not None:
        samples = [s for s in samples if s.date <= config.end]
    if not samples:
        raise PipelineError("no hashrate samples in the requested date range")

    if config.fixed_factor is not None:
        if not config.fixed_factor >= 0:
            raise PipelineError("fixed factor must be nonnegative")
        per_day = {}
    else:
        if not attributions:
            raise PipelineError("block attributions are required unless a fixed factor is configured")
        per_day = daily_factor_series(attributions, config.smoothing_days)
        first_block, last_block = min(per_day), max(per_day)
        if samples[-1].date < first_block or samples[0].date > last_block:
            raise PipelineError(
                f"no overlapping date range: hashrate {samples[0].date}..{samples[-1].date}, "
                f"blocks {first_block}..{last_block}"
            )
        if config.start is None:
            samples = [s for s in samples if s.date >= first_block]

    rows = []
    factor = config.fixed_factor
    for s in samples:
        day_factor, mapped, unmapped = per_day.get(s.date, (None, 0, 0))
        if day_factor is not None:
            factor = day_factor
        if factor is None:
            raise PipelineError(
                f"no emissions factor available for {s.date}: no mapped blocks on or before the first "
                "day; start later or extend the factor table / block data to cover it"
            )
        rows.append((s, factor, mapped, unmapped))

    def work(chunk):
        return [_day_estimate(*r, model, config) for r in chunk]

    n = max(1, config.workers)
    if n == 1:
        daily = work(rows)
    else:
        size = math.ceil(len(rows) / n)
        chunks = [rows[i : i + size] for i in range(0, len(rows), size)]
        with ThreadPoolExecutor(max_workers=n) as pool:
            daily = [d for part in pool.map(work, chunks) for d in part]

    for d in daily:
        for triple in (d.efficiency, d.power, d.energy, d.emissions):
            assert triple[0] <= triple[1] <= triple[2], f"bounds out of order on {d.date}: {triple}"
    return RunResult(daily, summarize(daily, config.report_start, config.hours_per_year), config)


def summarize(daily: Sequence[DailyEstimate], report_start: Optional[dt.date] = None, hours_per_year: float = HOURS_PER_YEAR) -> RunSummary:
    """Totals over the series; days before the data (from ``report_start``) add nothing."""
    if not daily:
        raise PipelineError("empty series")
    start = daily[0].date if report_start is None else min(report_start, daily[0].date)
    energy = tuple(math.fsum(d.energy[i] for d in daily) / 1e9 for i in range(3))
    emissions = tuple(math.fsum(d.emissions[i] for d in daily) / 1e6 for i in range(3))
    peak_p = max(daily, key=lambda d: (d.power[1], -d.date.toordinal()))
    peak_e = max(daily, key=lambda d: (d.emissions[1], -d.date.toordinal()))
    return RunSummary(
        start,
        daily[-1].date,
        energy,
        emissions,
        peak_p.date,
        peak_p.power,
        peak_e.date,
        peak_e.emissions,
        len(daily),
        hours_per_year,
    )


def comparison_report(
    daily: Sequence[DailyEstimate],
    mode: str,
    factors: Sequence[float],
    start: Optional[dt.date] = None,
    end: Optional[dt.date] = None,
) -> dict:
    """Recompute emissions at constant factors.

    ``fixed_factor`` gives per-day and total emissions for one factor;
    ``period_sum`` sums daily emissions over ``[start, end]`` for each factor.
    Energies are summed per bound; emissions are in tCO2 per day and MtCO2 total.
    """
    if mode not in ("fixed_factor", "period_sum"):
        raise ValueError(f"unknown comparison mode {mode!r}")
    if not daily:
        raise ValueError("empty series")
    rows = [d for d in daily if (start is None or d.date >= start) and (end is None or d.date <= end)]
    if not rows:
        raise ValueError(f"empty date range {start}..{end}")
    lbh = ("low", "best", "high")
    energy = [math.fsum(d.energy[i] for d in rows) for i in range(3)]
    report = {
        "mode": mode,
        "date_range": [rows[0].date.isoformat(), rows[-1].date.isoformat()],
        "days": len(rows),
        "energy_twh": dict(zip(lbh, (e / 1e9 for e in energy))),
    }
    if mode == "fixed_factor":
        if len(factors) != 1:
            raise ValueError("fixed_factor mode takes exactly one factor")
        f = factors[0]
        report["factor_gco2_kwh"] = f
        report["daily_tco2"] = [
            {"date": d.date.isoformat(), **dict(zip(lbh, (e * f / 1e6 for e in d.energy)))} for d in rows
        ]
        report["total_mtco2"] = dict(zip(lbh, (e * f / 1e12 for e in energy)))
    else:
        if not factors:
            raise ValueError("period_sum mode needs at least one factor")
        report["totals"] = [
            {"factor_gco2_kwh": f, "total_mtco2": dict(zip(lbh, (math.fsum(d.energy[i] * f for d in rows) / 1e12 for i in range(3))))}
            for f in factors
        ]
    return report


# -- output ------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def daily_csv(daily: Sequence[DailyEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DAILY_COLUMNS)
    for d in daily:
        w.writerow([_cell(v) for v in d.row()])
    return buf.getvalue()


def config_fingerprint(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def summary_json(summary: RunSummary, config: Optional[Mapping] = None) -> str:
    doc = summary.to_dict()
    config = dict(config or {})
    doc["config"] = config
    doc["config_fingerprint"] = config_fingerprint(config)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_series(
    daily: Sequence[DailyEstimate],
    summary: RunSummary,
    out_dir,
    formats: Sequence[str] = ("csv", "json"),
    config: Optional[Mapping] = None,
) -> list[Path]:
    """Write ``daily.csv`` and/or ``summary.json`` (plus ``daily.json``) to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            p = out / "daily.csv"
            p.write_text(daily_csv(daily), encoding="utf-8")
        elif fmt == "json":
            p = out / "daily.json"
            rows = [dict(zip(DAILY_COLUMNS, d.row())) for d in daily]
            p.write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
            written.append(p)
            p = out / "summary.json"
            p.write_text(summary_json(summary, config), encoding="utf-8")
        else:
            raise ValueError(f"unknown output format {fmt!r}")
        written.append(p)
    return written


def read_daily_csv(path) -> list[DailyEstimate]:
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != DAILY_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for r in reader:
            t = lambda k: tuple(float(r[f"{k}_{b}"]) for b in ("low", "best", "high"))  # noqa: E731
            out.append(
                DailyEstimate(
                    dt.date.fromisoformat(r["date"]),
                    float(r["hashrate_ths"]),
                    t("eff"),
                    t("power_w"),
                    t("energy_kwh"),
                    float(r["factor_gco2_kwh"]),
                    t("emissions_t"),
                    int(r["mapped_blocks"]),
                    int(r["unmapped_blocks"]),
                )
            )
    return out
