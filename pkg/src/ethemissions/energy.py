"""Network power from hashrate, hashing efficiency and overhead multipliers.

Power (W) = hashrate * over_hw * over_dc * loss_grid / (efficiency_hashing * efficiency_psu)
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Optional

from .records import ValidationError

HOURS_PER_DAY = 24.0
HOURS_PER_YEAR = 8766.0  # 365.25-day year
HOURS_PER_YEAR_365 = 8760.0
MHS_PER_THS = 1e6

Triple = tuple[float, float, float]


@dataclass(frozen=True)
class ScenarioParameters:
    over_hw: float = 1.03
    over_dc: float = 1.10
    loss_grid: float = 1.06
    eff_psu: float = 0.90

    def __post_init__(self):
        for name in ("over_hw", "over_dc", "loss_grid"):
            if not getattr(self, name) >= 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 < self.eff_psu <= 1:
            raise ValidationError(f"eff_psu must be in (0, 1], got {self.eff_psu}")

    @property
    def multiplier(self) -> float:
        return self.over_hw * self.over_dc * self.loss_grid / self.eff_psu


# Parameter bounds: "low" yields the lower energy estimate, "high" the higher.
LOW_PARAMETERS = ScenarioParameters(over_hw=1.01, over_dc=1.01, loss_grid=1.05, eff_psu=0.95)
BEST_PARAMETERS = ScenarioParameters(over_hw=1.03, over_dc=1.10, loss_grid=1.06, eff_psu=0.90)
HIGH_PARAMETERS = ScenarioParameters(over_hw=1.06, over_dc=1.20, loss_grid=1.07, eff_psu=0.80)


@dataclass(frozen=True)
class ScenarioSet:
    low: ScenarioParameters = LOW_PARAMETERS
    best: ScenarioParameters = BEST_PARAMETERS
    high: ScenarioParameters = HIGH_PARAMETERS

    def __post_init__(self):
        if not self.low.multiplier <= self.best.multiplier <= self.high.multiplier:
            raise ValidationError("scenario parameters must order low <= best <= high in energy")


DEFAULT_SCENARIOS = ScenarioSet()


def estimate_power(hashrate_ths: float, efficiency: float, params: ScenarioParameters = BEST_PARAMETERS) -> float:
    """Network power in W for a hashrate in TH/s and an efficiency in MH/s/W."""
    if not efficiency > 0:
        raise ValueError("division by nonpositive efficiency")
    if not hashrate_ths > 0:
        raise ValueError("hashrate must be positive")
    return hashrate_ths * MHS_PER_THS * params.over_hw * params.over_dc * params.loss_grid / (efficiency * params.eff_psu)


def estimate_power_additive(
    hashrate_ths: float, efficiency: float, params: ScenarioParameters, overhead_w_per_ths: float
) -> float:
    """Variant treating hardware overhead as fixed watts per TH/s instead of a ratio.

    ``params.over_hw`` is ignored in this mode.
    """
    if not efficiency > 0:
        raise ValueError("division by nonpositive efficiency")
    wall = hashrate_ths * MHS_PER_THS / (efficiency * params.eff_psu)
    return (wall + hashrate_ths * overhead_w_per_ths) * params.over_dc * params.loss_grid


def annualize(power_w: float, hours_per_year: float = HOURS_PER_YEAR) -> float:
    """Annualized energy in TWh/yr for a constant power in W."""
    if power_w < 0:
        raise ValueError("power must be nonnegative")
    return power_w * hours_per_year / 1e12


@dataclass(frozen=True)
class PowerEstimate:
    power: Triple  # W
    date: Optional[dt.date] = None
    hours_per_year: float = HOURS_PER_YEAR
    energy: Triple = field(init=False)  # kWh for the day
    annualized: Triple = field(init=False)  # TWh/yr

    def __post_init__(self):
        lo, best, hi = self.power
        if not lo <= best <= hi:
            raise ValidationError(f"power triple out of order: {self.power}")
        object.__setattr__(self, "energy", tuple(p * HOURS_PER_DAY / 1e3 for p in self.power))
        object.__setattr__(self, "annualized", tuple(annualize(p, self.hours_per_year) for p in self.power))


def scenario_triple(
    hashrate_ths: float,
    eff_triple: Triple,
    scenarios: ScenarioSet = DEFAULT_SCENARIOS,
    date: Optional[dt.date] = None,
    hours_per_year: float = HOURS_PER_YEAR,
) -> PowerEstimate:
    """Low/best/high power: the low case pairs low multipliers with the high efficiency."""
    eff_low, eff_best, eff_high = eff_triple
    if not eff_low <= eff_best <= eff_high:
        raise ValueError(f"efficiency triple out of order: {eff_triple}")
    power = (
        estimate_power(hashrate_ths, eff_high, scenarios.low),
        estimate_power(hashrate_ths, eff_best, scenarios.best),
        estimate_power(hashrate_ths, eff_low, scenarios.high),
    )
    return PowerEstimate(power, date, hours_per_year)


def compute_hw_overhead(
    gpu_count: int, per_gpu_power: float, psu_eff: float, base_power: float, *, whole_watts: bool = False
) -> float:
    """Worker wall power over GPU wall power for a rig with a fixed base load.

    ``whole_watts`` rounds the GPU wall power to an integer number of watts
    before dividing, the convention of hand-worked examples (70 W / 0.90 -> 78 W).
    """
    if gpu_count < 1:
        raise ValueError("gpu_count must be >= 1")
    if not (per_gpu_power > 0 and base_power > 0):
        raise ValueError("powers must be positive")
    if not 0 < psu_eff <= 1:
        raise ValueError("psu_eff must be in (0, 1]")
    wall_gpu = gpu_count * per_gpu_power / psu_eff
    if whole_watts:
        wall_gpu = float(round(wall_gpu))
    return (wall_gpu + base_power) / wall_gpu


def blend_hw_overhead(shares: Triple, overheads: Triple) -> float:
    """Hashrate-share-weighted hardware overhead."""
    if any(s < 0 for s in shares):
        raise ValueError("shares must be nonnegative")
    if not math.isclose(sum(shares), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"shares must sum to 1, got {sum(shares)!r}")
    return sum(s * o for s, o in zip(shares, overheads))
