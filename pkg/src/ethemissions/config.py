"""Run configuration: an INI-style ``key = value`` file whose keys mirror CLI flags.

Example::

    [paths]
    hashrate = data/hashrate.csv
    blocks = data/blocks.csv

    [run]
    smoothing_days = 21
    hours_per_year = 8766

    [scenario]
    eff_psu_best = 0.92

Relative paths are resolved against the config file's directory. A flag given
on the command line wins over the file.
"""

from __future__ import annotations

import configparser
import datetime as dt
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .energy import DEFAULT_SCENARIOS, ScenarioParameters, ScenarioSet
from .ingestion import GAP_POLICIES, shipped_path
from .records import HASHRATE_SOURCES, ValidationError

PATH_KEYS = (
    "hashrate",
    "blocks",
    "benchmarks",
    "model",
    "factors",
    "pool_regions",
    "region_grid_map",
    "patterns",
    "pool_addresses",
    "hardware_terms",
)
SHIPPED = {"benchmarks", "factors", "pool_regions", "region_grid_map", "patterns", "pool_addresses", "hardware_terms"}

RUN_KEYS = {
    "hashrate_source": str,
    "gap_policy": str,
    "smoothing_days": int,
    "hours_per_year": float,
    "start": dt.date.fromisoformat,
    "end": dt.date.fromisoformat,
    "fixed_factor": float,
    "workers": int,
    "out": str,
}

PARAM_NAMES = ("over_hw", "over_dc", "loss_grid", "eff_psu")
SCENARIO_KEYS = tuple(f"{p}_{s}" for p in PARAM_NAMES for s in ("low", "best", "high"))


@dataclass
class RunConfig:
    paths: dict[str, Optional[Path]] = field(default_factory=dict)
    hashrate_source: str = "etherscan"
    gap_policy: str = "reject"
    smoothing_days: int = 21
    hours_per_year: float = 8766.0
    start: Optional[dt.date] = None
    end: Optional[dt.date] = None
    fixed_factor: Optional[float] = None
    workers: int = 1
    out: str = "out"
    overrides: dict[str, float] = field(default_factory=dict)

    def path(self, key: str) -> Optional[Path]:
        p = self.paths.get(key)
        if p is None and key in SHIPPED:
            return shipped_path(f"{key}.csv")
        return p

    def scenarios(self) -> ScenarioSet:
        sets = {}
        for scenario in ("low", "best", "high"):
            base = getattr(DEFAULT_SCENARIOS, scenario)
            values = {p: self.overrides.get(f"{p}_{scenario}", getattr(base, p)) for p in PARAM_NAMES}
            sets[scenario] = ScenarioParameters(**values)
        return ScenarioSet(**sets)

    def validate(self, required: tuple[str, ...] = ()) -> None:
        for key in required:
            if self.path(key) is None:
                raise ValidationError(f"missing required path: {key}")
        for key in PATH_KEYS:
            p = self.path(key)
            if p is not None and not Path(p).exists():
                raise ValidationError(f"{key} file not found: {p}")
        if self.hashrate_source not in HASHRATE_SOURCES:
            raise ValidationError(f"hashrate_source must be one of {HASHRATE_SOURCES}")
        if self.gap_policy not in GAP_POLICIES:
            raise ValidationError(f"gap_policy must be one of {GAP_POLICIES}")
        if self.hours_per_year not in (8766.0, 8760.0):
            raise ValidationError("hours_per_year must be 8766 or 8760")
        if self.smoothing_days < 0:
            raise ValidationError("smoothing_days must be nonnegative")
        self.scenarios()

    def as_dict(self) -> dict:
        doc = {k: (None if v is None else str(v)) for k, v in sorted(self.paths.items())}
        out = {"paths": doc}
        for f in fields(self):
            if f.name in ("paths", "overrides", "out"):
                continue
            v = getattr(self, f.name)
            out[f.name] = v.isoformat() if isinstance(v, dt.date) else v
        out["overrides"] = dict(sorted(self.overrides.items()))
        return out


def read_config_file(path) -> dict[str, str]:
    """Flatten an INI file to ``{key: raw value}``; paths are made absolute."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.read(path, encoding="utf-8")
    known = set(PATH_KEYS) | set(RUN_KEYS) | set(SCENARIO_KEYS)
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key not in known:
                raise ValidationError(f"{path}: unknown key {key!r} in [{section}]")
            if key in PATH_KEYS or key == "out":
                value = str((path.parent / value).resolve()) if not Path(value).is_absolute() else value
            flat[key] = value
    return flat


def build_config(file_values: dict[str, str], cli_values: dict[str, object]) -> RunConfig:
    merged: dict[str, object] = dict(file_values)
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    cfg = RunConfig()
    for key in PATH_KEYS:
        if merged.get(key) is not None:
            cfg.paths[key] = Path(str(merged[key]))
    for key, conv in RUN_KEYS.items():
        if merged.get(key) is not None:
            raw = merged[key]
            try:
                setattr(cfg, key, raw if not isinstance(raw, str) else conv(raw))
            except ValueError as exc:
                raise ValidationError(f"bad value for {key}: {raw!r} ({exc})") from None
    for key in SCENARIO_KEYS:
        if merged.get(key) is not None:
            try:
                cfg.overrides[key] = float(merged[key])
            except ValueError:
                raise ValidationError(f"bad value for {key}: {merged[key]!r}") from None
    return cfg
