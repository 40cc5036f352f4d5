import datetime as dt
from pathlib import Path

import pytest

from ethemissions.efficiency import fit_efficiency_trend
from ethemissions.emissions import Attributor
from ethemissions.ingestion import load_benchmarks, load_blocks, load_hashrate, load_shipped, shipped_path

FIXTURES = Path(__file__).parent / "fixtures"
BUNDLE = FIXTURES / "bundle"


@pytest.fixture(scope="session")
def shipped():
    names = ("factors", "pool_regions", "region_grid_map", "patterns", "pool_addresses", "hardware_terms")
    return {n: load_shipped(n) for n in names}


@pytest.fixture(scope="session")
def attributor(shipped):
    return Attributor(
        shipped["patterns"], shipped["pool_regions"], shipped["pool_addresses"], shipped["region_grid_map"], shipped["factors"]
    )


@pytest.fixture(scope="session")
def benchmarks():
    return load_benchmarks(shipped_path("benchmarks.csv"))


@pytest.fixture(scope="session")
def model(benchmarks):
    return fit_efficiency_trend(benchmarks)


@pytest.fixture(scope="session")
def bundle_hashrate():
    return load_hashrate(BUNDLE / "hashrate.csv")


@pytest.fixture(scope="session")
def bundle_blocks():
    return load_blocks(BUNDLE / "blocks.csv")


@pytest.fixture(scope="session")
def bundle_attributions(attributor, bundle_blocks):
    return attributor.attribute_all(bundle_blocks)


def day(s: str) -> dt.date:
    return dt.date.fromisoformat(s)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: s.split(":")[0][-2:]):
            terminalreporter.write_line(line)
