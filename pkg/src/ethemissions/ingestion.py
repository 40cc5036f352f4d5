"""CSV loaders and canonical writers for every dataset the estimator consumes.

Loaders validate rows as they read them and raise :class:`IngestError` with
the offending line number. Outputs are canonically sorted so that loading is
independent of input row order, and every ``dump_*`` function writes the
canonical form back out.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import re
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

from .records import (
    GRIDS,
    HASHRATE_SOURCES,
    REGIONS,
    BenchmarkRecord,
    BlockRecord,
    EmissionsFactorTable,
    HardwareTermTable,
    HashrateSample,
    PatternTable,
    PoolRegionTable,
    RegionGridMap,
    ValidationError,
    WorkerSnapshot,
)

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

TABLE_SCHEMAS = ("factors", "pool_regions", "region_grid_map", "hardware_terms", "patterns", "pool_addresses")
GAP_POLICIES = ("reject", "forward-fill")

HEADERS = {
    "hashrate": ["date", "hashrate_ths"],
    "blocks": ["height", "timestamp", "miner", "extra_data_hex"],
    "benchmarks": ["hardware", "release_date", "hashrate_mhs", "power_w", "source"],
    "workers": ["snapshot_date", "worker_id", "hashrate_mhs"],
    "factors": ["grid", "year", "gco2_per_kwh", "provenance"],
    "pool_regions": ["pool", "regions"],
    "region_grid_map": ["region", "grids"],
    "patterns": ["pattern", "region"],
    "hardware_terms": ["term", "canonical_hardware"],
    "pool_addresses": ["address", "pool"],
}

_ADDRESS = re.compile(r"^0x[0-9a-f]{40}$")


class IngestError(ValidationError):
    """A dataset file could not be loaded."""

    def __init__(self, message: str, path: Optional[PathLike] = None, line: Optional[int] = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


def fmt_num(value: float) -> str:
    """Shortest round-trip text for a float, without a trailing ``.0``."""
    value = float(value)
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def shipped_path(name: str) -> Path:
    """Path of a data file bundled with the package (e.g. ``"factors.csv"``)."""
    return Path(str(resources.files("ethemissions") / "data" / name))


def _rows(path: PathLike, header: Sequence[str], min_fields: Optional[int] = None) -> Iterator[tuple[int, list[str]]]:
    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            first = next(reader)
        except StopIteration:
            raise IngestError("no samples", path) from None
        if [h.strip() for h in first] != list(header[: len(first)]) or len(first) < (min_fields or len(header)):
            raise IngestError(f"expected header {','.join(header)!r}, got {','.join(first)!r}", path, 1)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            yield reader.line_num, row


def _wrap(path, line, fn: Callable, *args):
    try:
        return fn(*args)
    except IngestError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        msg = str(exc).strip("'\"") or type(exc).__name__
        raise IngestError(msg, path, line) from None


def _write(rows: Iterable[Sequence[str]], header: Sequence[str], path: Optional[PathLike]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# -- hashrate ---------------------------------------------------------------


def load_hashrate(path: PathLike, source: str = "etherscan", gap_policy: str = "reject") -> list[HashrateSample]:
    """Load a ``date,hashrate_ths`` file into a contiguous daily series."""
    if source not in HASHRATE_SOURCES:
        raise IngestError(f"unknown source {source!r}; expected one of {HASHRATE_SOURCES}")
    if gap_policy not in GAP_POLICIES:
        raise IngestError(f"unknown gap policy {gap_policy!r}; expected one of {GAP_POLICIES}")

    def parse(row):
        if len(row) != 2:
            raise ValueError(f"expected 2 fields, got {len(row)}")
        day = dt.date.fromisoformat(row[0].strip())
        return HashrateSample(day, float(row[1]), source)

    by_date: dict[dt.date, HashrateSample] = {}
    for line, row in _rows(path, HEADERS["hashrate"]):
        sample = _wrap(path, line, parse, row)
        if sample.date in by_date:
            raise IngestError(f"duplicate date {sample.date}", path, line)
        by_date[sample.date] = sample
    if not by_date:
        raise IngestError("no samples", path)

    days = sorted(by_date)
    out = [by_date[days[0]]]
    for day in days[1:]:
        prev = out[-1]
        gap = (day - prev.date).days
        if gap > 1:
            if gap_policy == "reject":
                raise IngestError(f"non-contiguous dates: gap from {prev.date} to {day}", path)
            log.warning("%s: forward-filling %d missing days after %s", path, gap - 1, prev.date)
            for k in range(1, gap):
                out.append(HashrateSample(prev.date + dt.timedelta(days=k), prev.network_hashrate, source))
        out.append(by_date[day])
    return out


def dump_hashrate(samples: Sequence[HashrateSample], path: Optional[PathLike] = None) -> str:
    rows = [(s.date.isoformat(), fmt_num(s.network_hashrate)) for s in sorted(samples, key=lambda s: s.date)]
    return _write(rows, HEADERS["hashrate"], path)


def convert_etherscan_export(path: PathLike, unit: str = "GH/s") -> list[tuple[dt.date, float]]:
    """Read Etherscan's chart export (``Date(UTC),UnixTimeStamp,Value``).

    Returns ``(date, TH/s)`` pairs; ``unit`` is the unit of the ``Value`` column.
    """
    scale = {"GH/s": 1e-3, "TH/s": 1.0, "MH/s": 1e-6}[unit]
    out = []
    with open(path, newline="", encoding="utf-8-sig") as f:
        reader = csv.DictReader(f)
        for row in reader:
            stamp = int(row["UnixTimeStamp"])
            day = dt.datetime.fromtimestamp(stamp, tz=dt.timezone.utc).date()
            out.append((day, float(row["Value"]) * scale))
    if not out:
        raise IngestError("no samples", path)
    return sorted(out)


# -- blocks -----------------------------------------------------------------


def decode_extra_data(hex_text: str) -> tuple[bytes, str]:
    """Hex-decode then lossily UTF-8 decode an ``extraData`` field."""
    text = hex_text.strip()
    if text[:2].lower() == "0x":
        text = text[2:]
    raw = bytes.fromhex(text)
    if len(raw) > 32:
        raise ValidationError("extraData exceeds 32 bytes")
    return raw, raw.decode("utf-8", errors="replace")


def load_blocks(path: PathLike) -> list[BlockRecord]:
    """Load ``height,timestamp,miner,extra_data_hex`` rows sorted by height.

    Rows with invalid hex keep an empty ``extra_data``; the number of such
    rows is logged as a warning.
    """
    blocks: dict[int, BlockRecord] = {}
    bad_hex = 0
    for line, row in _rows(path, HEADERS["blocks"]):
        if len(row) != 4:
            raise IngestError(f"expected 4 fields, got {len(row)}", path, line)
        height = _wrap(path, line, int, row[0])
        timestamp = _wrap(path, line, int, row[1])
        miner = row[2].strip().lower()
        if not _ADDRESS.match(miner):
            raise IngestError(f"malformed miner address {row[2]!r}", path, line)
        try:
            raw, text = decode_extra_data(row[3])
        except ValidationError as exc:
            raise IngestError(str(exc), path, line) from None
        except ValueError:
            bad_hex += 1
            raw, text = b"", ""
        if height in blocks:
            raise IngestError(f"duplicate height {height}", path, line)
        blocks[height] = BlockRecord(height, timestamp, miner, text, raw)
    if bad_hex:
        log.warning("%s: %d rows with invalid extraData hex kept with empty extra_data", path, bad_hex)
    out = [blocks[h] for h in sorted(blocks)]
    for a, b in zip(out, out[1:]):
        if b.timestamp < a.timestamp:
            raise IngestError(f"timestamp decreases between heights {a.height} and {b.height}", path)
    return out


def dump_blocks(blocks: Sequence[BlockRecord], path: Optional[PathLike] = None) -> str:
    rows = [(b.height, b.timestamp, b.miner, b.raw_extra_data.hex()) for b in sorted(blocks, key=lambda b: b.height)]
    return _write(rows, HEADERS["blocks"], path)


# -- benchmarks & workers ---------------------------------------------------


def load_benchmarks(path: PathLike) -> list[BenchmarkRecord]:
    def parse(row):
        name, released, mhs, watts, source = (c.strip() for c in row)
        return BenchmarkRecord(name, dt.date.fromisoformat(released), float(mhs), float(watts), source)

    out = []
    for line, row in _rows(path, HEADERS["benchmarks"]):
        if len(row) != 5:
            raise IngestError(f"expected 5 fields, got {len(row)}", path, line)
        out.append(_wrap(path, line, parse, row))
    if not out:
        raise IngestError("no samples", path)
    return sorted(out, key=lambda b: (b.release_date, b.hardware_name, b.hashrate, b.power, b.source))


def dump_benchmarks(records: Sequence[BenchmarkRecord], path: Optional[PathLike] = None) -> str:
    rows = [
        (b.hardware_name, b.release_date.isoformat(), fmt_num(b.hashrate), fmt_num(b.power), b.source)
        for b in sorted(records, key=lambda b: (b.release_date, b.hardware_name, b.hashrate, b.power, b.source))
    ]
    return _write(rows, HEADERS["benchmarks"], path)


def load_workers(path: PathLike) -> list[WorkerSnapshot]:
    def parse(row):
        return WorkerSnapshot(dt.date.fromisoformat(row[0].strip()), row[1], float(row[2]))

    seen = set()
    out = []
    for line, row in _rows(path, HEADERS["workers"]):
        if len(row) != 3:
            raise IngestError(f"expected 3 fields, got {len(row)}", path, line)
        w = _wrap(path, line, parse, row)
        key = (w.snapshot_date, w.worker_id)
        if key in seen:
            raise IngestError(f"duplicate worker {w.worker_id!r} on {w.snapshot_date}", path, line)
        seen.add(key)
        out.append(w)
    if not out:
        raise IngestError("no samples", path)
    return sorted(out, key=lambda w: (w.snapshot_date, w.worker_id))


def dump_workers(workers: Sequence[WorkerSnapshot], path: Optional[PathLike] = None) -> str:
    rows = [
        (w.snapshot_date.isoformat(), w.worker_id, fmt_num(w.reported_hashrate))
        for w in sorted(workers, key=lambda w: (w.snapshot_date, w.worker_id))
    ]
    return _write(rows, HEADERS["workers"], path)


# -- tables -----------------------------------------------------------------


def parse_distribution(text: str) -> list[tuple[str, float]]:
    """Parse ``label=weight;label=weight`` (commas also accepted as separators)."""
    pairs = []
    for part in re.split(r"[;,]", text):
        part = part.strip()
        if not part:
            continue
        label, sep, weight = part.rpartition("=")
        if not sep or not label.strip():
            raise ValueError(f"malformed weight entry {part!r}")
        pairs.append((label.strip(), float(weight)))
    return pairs


def format_distribution(dist: Iterable[tuple[str, float]], digits: Optional[int] = None) -> str:
    if digits is None:
        return ";".join(f"{label}={fmt_num(w)}" for label, w in dist)
    return ";".join(f"{label}={w:.{digits}f}" for label, w in dist)


def _load_distribution_rows(path, schema, allowed: Sequence[str], what: str) -> dict[str, list[tuple[str, float]]]:
    rows: dict[str, list[tuple[str, float]]] = {}
    for line, row in _rows(path, HEADERS[schema]):
        if len(row) < 2:
            raise IngestError("expected a name and at least one weight", path, line)
        name = row[0].strip()
        # the weight list may itself be comma separated
        pairs = _wrap(path, line, parse_distribution, ";".join(row[1:]))
        for label, weight in pairs:
            if label not in allowed:
                raise IngestError(f"unknown {what} {label!r} in row {name!r}", path, line)
            if weight < 0:
                raise IngestError(f"negative weight for {label!r} in row {name!r}", path, line)
        if sum(w for _, w in pairs) <= 0:
            raise IngestError(f"empty distribution in row {name!r}", path, line)
        if name in rows:
            raise IngestError(f"duplicate row {name!r}", path, line)
        rows[name] = pairs
    if not rows:
        raise IngestError("no rows", path)
    return rows


def load_table(path: PathLike, schema: str, *, grids: Sequence[str] = GRIDS, regions: Sequence[str] = REGIONS):
    """Load a table file by schema name.

    Returns an :class:`EmissionsFactorTable`, :class:`PoolRegionTable`,
    :class:`RegionGridMap`, :class:`HardwareTermTable`, :class:`PatternTable`
    or, for ``pool_addresses``, a ``{address: pool}`` dict.
    """
    if schema == "factors":
        entries, prov = {}, {}
        for line, row in _rows(path, HEADERS["factors"], min_fields=3):
            if len(row) not in (3, 4):
                raise IngestError(f"expected 3 or 4 fields, got {len(row)}", path, line)
            grid = row[0].strip()
            if grid not in grids:
                raise IngestError(f"unknown grid {grid!r}", path, line)
            year = _wrap(path, line, int, row[1])
            value = _wrap(path, line, float, row[2])
            if (grid, year) in entries:
                raise IngestError(f"duplicate entry ({grid}, {year})", path, line)
            if not 0 < value < 1200:
                raise IngestError(f"factor {value} outside (0, 1200)", path, line)
            tag = row[3].strip() if len(row) == 4 and row[3].strip() else None
            entries[(grid, year)] = value
            prov[(grid, year)] = tag
        return _wrap(path, None, EmissionsFactorTable, entries, prov)
    if schema == "pool_regions":
        return PoolRegionTable(_load_distribution_rows(path, schema, regions, "region"))
    if schema == "region_grid_map":
        rows = _load_distribution_rows(path, schema, grids, "grid")
        for name in rows:
            if name not in regions:
                raise IngestError(f"unknown region label {name!r}", path)
        return RegionGridMap(rows)
    if schema == "patterns":
        rows = []
        for line, row in _rows(path, HEADERS["patterns"]):
            if len(row) != 2:
                raise IngestError(f"expected 2 fields, got {len(row)}", path, line)
            pattern, region = row[0], row[1].strip()
            if region not in regions:
                raise IngestError(f"unknown region label {region!r}", path, line)
            try:
                re.compile(pattern)
            except re.error as exc:
                raise IngestError(f"pattern {pattern!r} does not compile: {exc}", path, line) from None
            rows.append((pattern, region))
        return PatternTable(tuple(rows))
    if schema == "hardware_terms":
        rows = {}
        for line, row in _rows(path, HEADERS["hardware_terms"]):
            if len(row) != 2:
                raise IngestError(f"expected 2 fields, got {len(row)}", path, line)
            term = row[0].strip().lower()
            if not term:
                raise IngestError("empty term", path, line)
            if term in rows:
                raise IngestError(f"duplicate term {term!r}", path, line)
            rows[term] = row[1].strip()
        return HardwareTermTable(tuple(rows.items()))
    if schema == "pool_addresses":
        out = {}
        for line, row in _rows(path, HEADERS["pool_addresses"]):
            address = row[0].strip().lower()
            if not _ADDRESS.match(address):
                raise IngestError(f"malformed address {row[0]!r}", path, line)
            out[address] = row[1].strip()
        return dict(sorted(out.items()))
    raise IngestError(f"unknown schema {schema!r}; expected one of {TABLE_SCHEMAS}")


def dump_table(table, schema: str, path: Optional[PathLike] = None) -> str:
    if schema == "factors":
        rows = [
            (g, y, fmt_num(v), table.provenance.get((g, y)) or "")
            for (g, y), v in sorted(table.entries.items())
        ]
    elif schema in ("pool_regions", "region_grid_map"):
        rows = [(name, format_distribution(dist)) for name, dist in sorted(table.raw.items())]
    elif schema == "patterns":
        rows = list(table.rows)  # order is significant
    elif schema == "hardware_terms":
        rows = list(table.rows)
    elif schema == "pool_addresses":
        rows = sorted(table.items())
    else:
        raise IngestError(f"unknown schema {schema!r}")
    return _write(rows, HEADERS[schema], path)


def load_shipped(schema: str):
    """Load one of the bundled reference tables."""
    return load_table(shipped_path(f"{schema}.csv"), schema)
