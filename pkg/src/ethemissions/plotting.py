"""Static SVG figures for the daily series.

Bands are drawn as step polygons (one flat segment per day), so the band
area in data units equals the sum of ``high - low`` times one day.
"""

from __future__ import annotations

import datetime as dt
import math
from collections import defaultdict
from typing import Optional, Sequence
from xml.sax.saxutils import escape

from .emissions import BlockAttribution
from .energy import HOURS_PER_YEAR
from .pipeline import DailyEstimate

FIGURES = ("power", "efficiency", "regions", "factors", "emissions")

WIDTH, HEIGHT = 960, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 90, 40, 60

REGION_GROUPS = ("asia/china", "europe", "us", "russia/ukraine", "unknown")
GROUP_OF = {
    "asia": "asia/china",
    "china": "asia/china",
    "singapore": "asia/china",
    "taiwan": "asia/china",
    "seoul": "asia/china",
    "europe": "europe",
    "europe-west": "europe",
    "europe-north": "europe",
    "us": "us",
    "us-east": "us",
    "us-west": "us",
    "russia": "russia/ukraine",
    "ukraine": "russia/ukraine",
}
GROUP_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#bbbbbb")
MARKERS = ((dt.date(2021, 5, 21), "China mining ban"), (dt.date(2021, 9, 23), "China crypto ban"))


class PlotError(ValueError):
    pass


def nice_ceiling(x: float) -> float:
    if x <= 0:
        return 1.0
    exp = 10.0 ** math.floor(math.log10(x))
    if exp == 0:  # subnormal input underflows
        return 1.0
    for m in (1, 1.2, 1.5, 2, 2.5, 3, 4, 5, 6, 8, 10):
        if m * exp >= x:
            return m * exp
    return 10 * exp


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def _label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 100:
        return f"{v:.0f}"
    return f"{v:.3g}"


class Frame:
    """Maps (day offset, value) to pixel coordinates."""

    def __init__(self, first: dt.date, n_days: int, y_max: float):
        self.first = first
        self.n_days = max(1, n_days)
        self.y_max = y_max
        self.px_per_day = (WIDTH - LEFT - RIGHT) / self.n_days
        self.px_per_unit = (HEIGHT - TOP - BOTTOM) / y_max

    def x(self, day_offset: float) -> float:
        return LEFT + day_offset * self.px_per_day

    def y(self, value: float) -> float:
        return HEIGHT - BOTTOM - value * self.px_per_unit


def _date_ticks(first: dt.date, n_days: int) -> list[tuple[float, str]]:
    if n_days <= 1:
        return [(0.0, first.isoformat())]
    last = first + dt.timedelta(days=n_days)
    if n_days > 3 * 365:
        marks = [dt.date(y, 1, 1) for y in range(first.year + (first > dt.date(first.year, 1, 1)), last.year + 1)]
        fmt = "%Y"
    elif n_days > 90:
        step = max(1, round(n_days / 30 / 8))
        marks, d = [], dt.date(first.year, first.month, 1)
        while d <= last:
            if d >= first and (d.month - 1) % step == 0:
                marks.append(d)
            d = dt.date(d.year + d.month // 12, d.month % 12 + 1, 1)
        fmt = "%Y-%m"
    else:
        step = max(1, round(n_days / 8))
        marks = [first + dt.timedelta(days=k) for k in range(0, n_days, step)]
        fmt = "%Y-%m-%d"
    return [((m - first).days, m.strftime(fmt)) for m in marks if 0 <= (m - first).days <= n_days]


def step_points(frame: Frame, values: Sequence[float]) -> list[tuple[float, float]]:
    pts = []
    for i, v in enumerate(values):
        pts.append((frame.x(i), frame.y(v)))
        pts.append((frame.x(i + 1), frame.y(v)))
    return pts


def band_points(frame: Frame, low: Sequence[float], high: Sequence[float]) -> list[tuple[float, float]]:
    return step_points(frame, high) + list(reversed(step_points(frame, low)))


def _path(points, close: bool) -> str:
    d = " ".join(("M" if i == 0 else "L") + f"{_fmt(x)},{_fmt(y)}" for i, (x, y) in enumerate(points))
    return d + (" Z" if close else "")


def _axes(frame: Frame, title: str, left_label: str, right_label: Optional[str], right_scale: float) -> list[str]:
    out = []
    x0, x1 = LEFT, WIDTH - RIGHT
    y0, y1 = HEIGHT - BOTTOM, TOP
    out.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>')
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" stroke="#333"/>')
    for k in range(6):
        v = frame.y_max * k / 5
        y = frame.y(v)
        out.append(f'<line class="grid" x1="{x0}" y1="{_fmt(y)}" x2="{x1}" y2="{_fmt(y)}" stroke="#ddd"/>')
        out.append(f'<text class="ytick" x="{x0 - 6}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11">{_label(v)}</text>')
        if right_label:
            out.append(
                f'<text class="ytick-right" x="{x1 + 6}" y="{_fmt(y + 4)}" font-size="11">{_label(v * right_scale)}</text>'
            )
    for offset, text in _date_ticks(frame.first, frame.n_days):
        x = frame.x(offset)
        out.append(f'<line class="xtick" x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 5}" stroke="#333"/>')
        out.append(f'<text class="xlabel" x="{_fmt(x)}" y="{y0 + 20}" text-anchor="middle" font-size="11">{escape(text)}</text>')
    out.append(
        f'<text x="18" y="{(y0 + y1) / 2}" transform="rotate(-90 18 {(y0 + y1) / 2})" '
        f'text-anchor="middle" font-size="12">{escape(left_label)}</text>'
    )
    if right_label:
        xr = WIDTH - 16
        out.append(
            f'<text x="{xr}" y="{(y0 + y1) / 2}" transform="rotate(90 {xr} {(y0 + y1) / 2})" '
            f'text-anchor="middle" font-size="12">{escape(right_label)}</text>'
        )
    return out


def _document(body: list[str], frame: Frame, figure: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-figure="{figure}" '
        f'data-first-day="{frame.first.isoformat()}" data-days="{frame.n_days}" '
        f'data-px-per-day="{frame.px_per_day!r}" data-px-per-unit="{frame.px_per_unit!r}">'
    )
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def band_figure(
    days: Sequence[dt.date],
    low: Sequence[float],
    best: Sequence[float],
    high: Sequence[float],
    title: str,
    left_label: str,
    right_label: Optional[str] = None,
    right_scale: float = 1.0,
    figure: str = "band",
    color: str = "#1f77b4",
) -> str:
    if not days:
        raise PlotError("empty series")
    frame = Frame(days[0], len(days), nice_ceiling(max(high) * 1.05))
    body = _axes(frame, title, left_label, right_label, right_scale)
    body.append(f'<path class="band" d="{_path(band_points(frame, low, high), True)}" fill="{color}" fill-opacity="0.25" stroke="none"/>')
    body.append(f'<path class="best" d="{_path(step_points(frame, best), False)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    return _document(body, frame, figure)


def plot_daily(daily: Sequence[DailyEstimate], figure: str, hours_per_year: float = HOURS_PER_YEAR) -> str:
    if figure not in FIGURES:
        raise PlotError(f"unknown figure {figure!r}; valid names: {', '.join(FIGURES)}")
    if figure == "regions":
        raise PlotError("the regions figure is drawn from attributions; use plot_regions")
    if not daily:
        raise PlotError("empty series")
    days = [d.date for d in daily]
    if figure == "power":
        gw = [[d.power[i] / 1e9 for d in daily] for i in range(3)]
        return band_figure(days, *gw, "Ethereum network power", "GW", "TWh/yr (annualized)", hours_per_year / 1e3, figure)
    if figure == "efficiency":
        e = [[d.efficiency[i] for d in daily] for i in range(3)]
        return band_figure(days, *e, "Hashing efficiency", "MH/s/W", figure=figure, color="#ff7f0e")
    if figure == "factors":
        f = [d.network_factor for d in daily]
        return band_figure(days, f, f, f, "Network emissions factor", "gCO2/kWh", figure=figure, color="#8c564b")
    kt = [[d.emissions[i] / 1e3 for d in daily] for i in range(3)]
    return band_figure(
        days, *kt, "Ethereum emissions", "ktCO2/day", "MtCO2/yr (annualized)", hours_per_year / 24 / 1e3, figure, "#d62728"
    )


def region_shares(attributions: Sequence[BlockAttribution]) -> tuple[list[dt.date], dict[str, list[float]]]:
    """Daily share of blocks per region group; unmapped blocks count as unknown."""
    per_day: dict[dt.date, dict[str, float]] = defaultdict(lambda: dict.fromkeys(REGION_GROUPS, 0.0))
    counts: dict[dt.date, int] = defaultdict(int)
    for a in attributions:
        if a.day is None:
            raise PlotError(f"attribution for block {a.height} has no date")
        counts[a.day] += 1
        if a.method == "unmapped":
            per_day[a.day]["unknown"] += 1
        for region, w in a.region_mix:
            per_day[a.day][GROUP_OF.get(region, "unknown")] += w
    days = sorted(per_day)
    if not days:
        raise PlotError("no attributions")
    first, last = days[0], days[-1]
    all_days = [first + dt.timedelta(days=k) for k in range((last - first).days + 1)]
    shares = {g: [] for g in REGION_GROUPS}
    for d in all_days:
        n = counts.get(d, 0)
        for g in REGION_GROUPS:
            shares[g].append(per_day[d][g] / n if n else (1.0 if g == "unknown" else 0.0))
    return all_days, shares


def plot_regions(attributions: Sequence[BlockAttribution]) -> str:
    days, shares = region_shares(attributions)
    frame = Frame(days[0], len(days), 1.0)
    body = _axes(frame, "Mining region distribution", "share of blocks", None, 1.0)
    base = [0.0] * len(days)
    for g, color in zip(REGION_GROUPS, GROUP_COLORS):
        top = [b + s for b, s in zip(base, shares[g])]
        body.append(
            f'<path class="stack" data-group="{escape(g)}" d="{_path(band_points(frame, base, top), True)}" fill="{color}" stroke="none"/>'
        )
        base = top
    for day, text in MARKERS:
        if days[0] <= day <= days[-1]:
            x = frame.x((day - days[0]).days)
            body.append(f'<line class="marker" x1="{_fmt(x)}" y1="{TOP}" x2="{_fmt(x)}" y2="{HEIGHT - BOTTOM}" stroke="#000" stroke-dasharray="4 3"/>')
            body.append(f'<text x="{_fmt(x + 3)}" y="{TOP + 12}" font-size="10">{escape(text)}</text>')
    for k, (g, color) in enumerate(zip(REGION_GROUPS, GROUP_COLORS)):
        y = TOP + 14 + 16 * k
        body.append(f'<rect x="{LEFT + 8}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        body.append(f'<text x="{LEFT + 22}" y="{y}" font-size="11">{escape(g)}</text>')
    return _document(body, frame, "regions")


def path_points(d: str) -> list[tuple[float, float]]:
    """Parse the ``M``/``L`` point list of a path written by this module."""
    pts = []
    for token in d.replace("Z", "").split():
        xs, ys = token[1:].split(",")
        pts.append((float(xs), float(ys)))
    return pts
