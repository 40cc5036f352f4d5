"""Bottom-up energy and CO2 emissions estimates for proof-of-work Ethereum."""

__version__ = "0.1.0"

from .efficiency import EfficiencyModel, efficiency_at, fit_efficiency_trend
from .emissions import Attributor, BlockAttribution, classify_block, grid_mix_factor
from .energy import DEFAULT_SCENARIOS, ScenarioParameters, ScenarioSet, estimate_power, scenario_triple
from .pipeline import DailyEstimate, PipelineConfig, RunSummary, run_pipeline

__all__ = [
    "Attributor",
    "BlockAttribution",
    "DEFAULT_SCENARIOS",
    "DailyEstimate",
    "EfficiencyModel",
    "PipelineConfig",
    "RunSummary",
    "ScenarioParameters",
    "ScenarioSet",
    "classify_block",
    "efficiency_at",
    "estimate_power",
    "fit_efficiency_trend",
    "grid_mix_factor",
    "run_pipeline",
    "scenario_triple",
]
