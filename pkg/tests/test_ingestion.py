import datetime as dt
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ethemissions.ingestion import (
    TABLE_SCHEMAS,
    IngestError,
    convert_etherscan_export,
    decode_extra_data,
    dump_benchmarks,
    dump_blocks,
    dump_hashrate,
    dump_table,
    dump_workers,
    load_benchmarks,
    load_blocks,
    load_hashrate,
    load_table,
    load_workers,
    parse_distribution,
    shipped_path,
)
from ethemissions.records import BlockRecord, HashrateSample, normalize_weights

import oracles
from conftest import BUNDLE, FIXTURES

ADDR = "0x" + "12" * 20


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# -- round trips --------------------------------------------------------------


@pytest.mark.parametrize("schema", TABLE_SCHEMAS)
def test_shipped_tables_round_trip_byte_identical(schema):
    path = shipped_path(f"{schema}.csv")
    assert dump_table(load_table(path, schema), schema) == path.read_text(encoding="utf-8")


def test_shipped_benchmarks_round_trip():
    path = shipped_path("benchmarks.csv")
    assert dump_benchmarks(load_benchmarks(path)) == path.read_text(encoding="utf-8")


def test_fixture_files_round_trip(tmp_path):
    for path, load, dump in (
        (BUNDLE / "hashrate.csv", load_hashrate, dump_hashrate),
        (BUNDLE / "blocks.csv", load_blocks, dump_blocks),
    ):
        assert dump(load(path)) == path.read_text(encoding="utf-8")
    # workers are written in generation order; canonical output is sorted, then stable
    workers = load_workers(FIXTURES / "workers.csv")
    canonical = write(tmp_path, "w.csv", dump_workers(workers))
    assert load_workers(canonical) == workers
    assert dump_workers(load_workers(canonical)) == canonical.read_text()


hashrates = st.lists(st.floats(min_value=1e-3, max_value=1e6, allow_nan=False), min_size=1, max_size=40)


@settings(max_examples=60, deadline=None)
@given(values=hashrates, seed=st.integers(0, 2**32 - 1))
def test_hashrate_round_trip_and_order_independence(tmp_path_factory, values, seed):
    tmp = tmp_path_factory.mktemp("h")
    start = dt.date(2016, 2, 27)
    rows = [f"{(start + dt.timedelta(days=i)).isoformat()},{v!r}" for i, v in enumerate(values)]
    random.Random(seed).shuffle(rows)
    path = write(tmp, "h.csv", "date,hashrate_ths\n" + "\n".join(rows) + "\n")
    samples = load_hashrate(path)
    assert [s.network_hashrate for s in samples] == values
    canonical = dump_hashrate(samples)
    again = write(tmp, "h2.csv", canonical)
    assert dump_hashrate(load_hashrate(again)) == canonical


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_table_loaders_are_order_independent(tmp_path_factory, seed):
    tmp = tmp_path_factory.mktemp("t")
    for schema in ("factors", "pool_regions", "region_grid_map", "hardware_terms", "pool_addresses"):
        lines = shipped_path(f"{schema}.csv").read_text().splitlines()
        body = lines[1:]
        random.Random(seed).shuffle(body)
        p = write(tmp, f"{schema}.csv", "\n".join([lines[0], *body]) + "\n")
        assert dump_table(load_table(p, schema), schema) == shipped_path(f"{schema}.csv").read_text()


# -- hashrate -------------------------------------------------------------------


def test_hashrate_gap_rejected_by_default(tmp_path):
    p = write(tmp_path, "h.csv", "date,hashrate_ths\n2016-01-01,1\n2016-01-04,2\n")
    with pytest.raises(IngestError, match="non-contiguous dates"):
        load_hashrate(p)


def test_hashrate_gap_forward_fill(tmp_path):
    p = write(tmp_path, "h.csv", "date,hashrate_ths\n2016-01-01,1\n2016-01-04,2\n")
    s = load_hashrate(p, gap_policy="forward-fill")
    assert [x.network_hashrate for x in s] == [1, 1, 1, 2]
    assert s[-1].date == dt.date(2016, 1, 4)


@pytest.mark.parametrize(
    "body, message",
    [
        ("2016-01-01,0\n", "hashrate must be positive"),
        ("2016-01-01,-3\n", "hashrate must be positive"),
        ("2016-01-01,1\n2016-01-01,2\n", "duplicate date"),
        ("2016-13-01,1\n", "month must be in 1..12"),
        ("", "no samples"),
    ],
)
def test_hashrate_errors(tmp_path, body, message):
    p = write(tmp_path, "h.csv", "date,hashrate_ths\n" + body)
    with pytest.raises(IngestError, match=message):
        load_hashrate(p)


def test_hashrate_error_names_file_and_line(tmp_path):
    p = write(tmp_path, "h.csv", "date,hashrate_ths\n2016-01-01,1\n2016-01-02,abc\n")
    with pytest.raises(IngestError) as info:
        load_hashrate(p)
    assert info.value.line == 3
    assert str(info.value).startswith(f"{p}:3: ")


def test_hashrate_rejects_unknown_source_and_header(tmp_path):
    p = write(tmp_path, "h.csv", "date,hashrate_ths\n2016-01-01,1\n")
    with pytest.raises(IngestError, match="unknown source"):
        load_hashrate(p, source="blockchair")
    q = write(tmp_path, "q.csv", "day,ths\n2016-01-01,1\n")
    with pytest.raises(IngestError, match="expected header"):
        load_hashrate(q)


def test_missing_file(tmp_path):
    with pytest.raises(IngestError, match="file not found"):
        load_hashrate(tmp_path / "nope.csv")


def test_etherscan_export_conversion(tmp_path):
    p = write(
        tmp_path,
        "export.csv",
        '﻿"Date(UTC)","UnixTimeStamp","Value"\n"7/30/2015","1438214400","11.5297"\n"7/31/2015","1438300800","51.4594"\n',
    )
    rows = convert_etherscan_export(p, unit="GH/s")
    assert rows == [(dt.date(2015, 7, 30), pytest.approx(0.0115297)), (dt.date(2015, 7, 31), pytest.approx(0.0514594))]


# -- blocks ---------------------------------------------------------------------


def block_file(tmp_path, rows):
    return write(tmp_path, "b.csv", "height,timestamp,miner,extra_data_hex\n" + "".join(r + "\n" for r in rows))


def test_extra_data_decoding():
    raw, text = decode_extra_data("0x" + b"eu-w1".hex())
    assert raw == b"eu-w1" and text == "eu-w1"
    raw, text = decode_extra_data("ff61")
    assert raw == b"\xffa" and text == "�a"


def test_block_extra_data_over_32_bytes_rejected(tmp_path):
    p = block_file(tmp_path, [f"1,1438300000,{ADDR},{'61' * 33}"])
    with pytest.raises(IngestError, match="exceeds 32 bytes") as info:
        load_blocks(p)
    assert info.value.line == 2


def test_block_invalid_hex_kept_empty_with_warning(tmp_path, caplog):
    p = block_file(tmp_path, [f"1,1438300000,{ADDR},zz", f"2,1438300010,{ADDR},6575"])
    blocks = load_blocks(p)
    assert blocks[0].extra_data == "" and blocks[0].raw_extra_data == b""
    assert blocks[1].extra_data == "eu"
    assert "1 rows with invalid extraData hex" in caplog.text


@pytest.mark.parametrize(
    "rows, message",
    [
        ([f"1,10,{ADDR},", f"1,11,{ADDR},"], "duplicate height 1"),
        ([f"1,10,{ADDR},", f"2,9,{ADDR},"], "timestamp decreases"),
        (["1,10,0x12,"], "malformed miner address"),
        ([f"1,10,{ADDR}"], "expected 4 fields"),
    ],
)
def test_block_errors(tmp_path, rows, message):
    with pytest.raises(IngestError, match=message):
        load_blocks(block_file(tmp_path, rows))


def test_blocks_sorted_by_height_and_day_is_utc(tmp_path):
    # 1438300799 is 2015-07-30T23:59:59Z
    p = block_file(tmp_path, [f"2,1438300800,{ADDR},", f"1,1438300799,{ADDR.upper().replace('0X', '0x')},"])
    b = load_blocks(p)
    assert [x.height for x in b] == [1, 2]
    assert b[0].day == dt.date(2015, 7, 30) and b[1].day == dt.date(2015, 7, 31)
    assert b[0].miner == ADDR


def test_block_record_rejects_long_raw():
    with pytest.raises(ValueError):
        BlockRecord(1, 0, ADDR, "", b"x" * 33)


# -- benchmarks & workers ---------------------------------------------------------


def test_benchmark_efficiency_bounds(tmp_path):
    p = write(tmp_path, "b.csv", "hardware,release_date,hashrate_mhs,power_w,source\nX,2020-01-01,500,200,test\n")
    with pytest.raises(IngestError, match="efficiency"):
        load_benchmarks(p)


def test_worker_duplicates_rejected(tmp_path):
    p = write(tmp_path, "w.csv", "snapshot_date,worker_id,hashrate_mhs\n2021-10-20,a,1\n2021-10-20,a,2\n")
    with pytest.raises(IngestError, match="duplicate worker"):
        load_workers(p)


# -- tables ---------------------------------------------------------------------


def test_shipped_factor_table_matches_reference():
    table = load_table(shipped_path("factors.csv"), "factors")
    assert table.grids == tuple(sorted(oracles.FACTORS))
    assert table.years == oracles.YEARS
    for grid, values in oracles.FACTORS.items():
        for year, v in zip(oracles.YEARS, values):
            assert table.factor(grid, year) == v


def test_shipped_region_map_matches_reference():
    m = load_table(shipped_path("region_grid_map.csv"), "region_grid_map")
    assert set(m.rows) == set(oracles.REGION_GRIDS)
    for region, grids in oracles.REGION_GRIDS.items():
        assert dict(m.raw[region]) == {g: float(w) for g, w in grids.items()}


def test_factor_provenance_shares_cover_all_entries():
    shares = load_table(shipped_path("factors.csv"), "factors").provenance_shares()
    assert set(shares) == {"government", "energy_mix", "interpolated", "third_party"}
    assert sum(shares.values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "schema, body, message",
    [
        ("region_grid_map", "asia,Atlantis=1\n", "unknown grid 'Atlantis' in row 'asia'"),
        ("region_grid_map", "mars,Asia=1\n", "unknown region label 'mars'"),
        ("region_grid_map", "asia,Asia=-1;China=2\n", "negative weight"),
        ("pool_regions", "Pool X,europe=0;us=0\n", "empty distribution in row 'Pool X'"),
        ("pool_regions", "P,europe=1\nP,us=1\n", "duplicate row 'P'"),
        ("factors", "Asia,2015,0,government\n", "outside"),
        ("factors", "Asia,2015,10,guess\n", "unknown provenance"),
        ("factors", "Mars,2015,10,\n", "unknown grid"),
        ("patterns", "(unclosed,asia\n", "does not compile"),
        ("pool_addresses", "0x12,Pool\n", "malformed address"),
    ],
)
def test_table_errors(tmp_path, schema, body, message):
    from ethemissions.ingestion import HEADERS

    p = write(tmp_path, f"{schema}.csv", ",".join(HEADERS[schema]) + "\n" + body)
    with pytest.raises(IngestError, match=message.replace("(", r"\(")):
        load_table(p, schema)


def test_factor_rows_without_provenance_are_allowed(tmp_path):
    p = write(tmp_path, "f.csv", "grid,year,gco2_per_kwh\nAsia,2015,666\n")
    t = load_table(p, "factors")
    assert t.factor("Asia", 2015) == 666 and t.provenance[("Asia", 2015)] is None


def test_distribution_separators():
    assert parse_distribution("europe=95;us=4, asia=1") == [("europe", 95.0), ("us", 4.0), ("asia", 1.0)]
    with pytest.raises(ValueError, match="malformed"):
        parse_distribution("europe")


weights = st.lists(
    st.tuples(st.sampled_from("abcdefgh"), st.floats(min_value=0, max_value=1e6, allow_nan=False)),
    min_size=1,
    max_size=12,
).filter(lambda xs: sum(w for _, w in xs) > 0)


@given(weights)
def test_normalized_weights_sum_to_one(pairs):
    dist = normalize_weights(pairs)
    assert abs(sum(w for _, w in dist) - 1) <= 1e-9
    assert all(w > 0 for _, w in dist)


def test_shipped_weight_rows_are_normalized(shipped):
    for schema in ("pool_regions", "region_grid_map"):
        for dist in shipped[schema].rows.values():
            assert abs(sum(w for _, w in dist) - 1) <= 1e-9


def test_hashrate_sample_validation():
    with pytest.raises(ValueError):
        HashrateSample(dt.date(2016, 1, 1), 0.0, "etherscan")
