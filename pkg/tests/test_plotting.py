import datetime as dt
import math
import re
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ethemissions.plotting import (
    FIGURES,
    PlotError,
    band_figure,
    nice_ceiling,
    path_points,
    plot_daily,
    plot_regions,
    region_shares,
)
from ethemissions.pipeline import PipelineConfig, run_pipeline

SVG = "{http://www.w3.org/2000/svg}"


def shoelace(points):
    n = len(points)
    return abs(sum(points[i][0] * points[(i + 1) % n][1] - points[(i + 1) % n][0] * points[i][1] for i in range(n))) / 2


def parse(svg):
    root = ET.fromstring(svg)
    return root, {p.get("class"): p for p in root.iter(f"{SVG}path")}


@pytest.fixture(scope="module")
def daily(bundle_hashrate, model, bundle_attributions):
    return run_pipeline(bundle_hashrate, model, bundle_attributions, PipelineConfig()).daily


@settings(max_examples=60, deadline=None)
@given(
    rows=st.lists(
        st.tuples(st.floats(0, 50, allow_nan=False), st.floats(0, 50, allow_nan=False)), min_size=1, max_size=40
    )
)
def test_band_area_equals_sum_of_daily_widths(rows):
    low = [min(a, b) for a, b in rows]
    high = [max(a, b) for a, b in rows]
    days = [dt.date(2018, 1, 1) + dt.timedelta(days=i) for i in range(len(rows))]
    root, paths = parse(band_figure(days, low, low, high, "t", "u"))
    px_day, px_unit = float(root.get("data-px-per-day")), float(root.get("data-px-per-unit"))
    pts = path_points(paths["band"].get("d"))
    area_px = shoelace(pts)
    want = sum(h - l for l, h in zip(low, high))
    # coordinates are written to 3 decimals: each shifts by at most 0.0005 px,
    # which moves the area by at most 0.0005 px per px of perimeter
    perimeter = sum(math.dist(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts)))
    tolerance = 0.0005 * perimeter + 1e-9
    assert abs(area_px - want * px_day * px_unit) <= tolerance


@pytest.mark.parametrize("figure", [f for f in FIGURES if f != "regions"])
def test_daily_figures_render(daily, figure):
    svg = plot_daily(daily, figure)
    root, paths = parse(svg)
    assert root.get("data-figure") == figure
    assert int(root.get("data-days")) == len(daily)
    assert {"band", "best"} <= set(paths)
    assert plot_daily(daily, figure) == svg  # deterministic


def test_power_figure_right_axis_is_annualized(daily):
    root, _ = parse(plot_daily(daily, "power"))
    left = [t.text for t in root.iter(f"{SVG}text") if t.get("class") == "ytick"]
    right = [t.text for t in root.iter(f"{SVG}text") if t.get("class") == "ytick-right"]
    # GW on the left, TWh/yr = GW * 8.766 on the right
    top_left, top_right = float(left[-1]), float(right[-1])
    assert top_right == pytest.approx(top_left * 8.766, rel=5e-3)


def test_unknown_figure_lists_valid_names(daily):
    with pytest.raises(PlotError, match="valid names: power, efficiency, regions, factors, emissions"):
        plot_daily(daily, "pie")


def test_empty_series():
    with pytest.raises(PlotError, match="empty"):
        plot_daily([], "power")


def test_regions_figure(bundle_attributions):
    days, shares = region_shares(bundle_attributions)
    for i in range(len(days)):
        assert sum(shares[g][i] for g in shares) == pytest.approx(1.0, abs=1e-9)
    svg = plot_regions(bundle_attributions)
    root, _ = parse(svg)
    stacks = [p for p in root.iter(f"{SVG}path") if p.get("class") == "stack"]
    assert [p.get("data-group") for p in stacks] == ["asia/china", "europe", "us", "russia/ukraine", "unknown"]
    # fixture ends in 2016, so no ban markers
    assert not [e for e in root.iter(f"{SVG}line") if e.get("class") == "marker"]


def test_regions_markers_inside_range():
    from ethemissions.emissions import BlockAttribution

    atts = [
        BlockAttribution(1, "extra_data", (("china", 1.0),), 570.0, dt.date(2021, 5, 1)),
        BlockAttribution(2, "extra_data", (("us", 1.0),), 370.0, dt.date(2021, 10, 1)),
    ]
    root, _ = parse(plot_regions(atts))
    assert len([e for e in root.iter(f"{SVG}line") if e.get("class") == "marker"]) == 2


def test_nice_ceiling():
    assert nice_ceiling(0.93) == 1.0
    assert nice_ceiling(11) == 12
    assert nice_ceiling(0) == 1.0
    assert nice_ceiling(7.3e9) == 8e9


def test_path_points_round_trip():
    assert path_points("M1,2 L3.5,4 L5,6 Z") == [(1.0, 2.0), (3.5, 4.0), (5.0, 6.0)]


def test_no_nan_in_output(daily):
    for figure in ("power", "emissions", "efficiency", "factors"):
        assert not re.search(r"nan|inf", plot_daily(daily, figure), re.IGNORECASE)
