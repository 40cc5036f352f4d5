"""``ethemissions`` command-line front end.

Exit codes: 0 success, 1 validation error, 2 runtime or I/O error. Failures
print a single ``error: <kind>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import PATH_KEYS, RUN_KEYS, SCENARIO_KEYS, RunConfig, build_config, read_config_file
from .efficiency import EfficiencyModel, efficiency_at, fit_efficiency_trend
from .emissions import Attributor, coverage, dump_attributions, load_attributions
from .fetch import FetchError, RpcClient, fetch_blocks
from .ingestion import (
    TABLE_SCHEMAS,
    IngestError,
    convert_etherscan_export,
    dump_benchmarks,
    dump_blocks,
    dump_hashrate,
    dump_table,
    dump_workers,
    fmt_num,
    load_benchmarks,
    load_blocks,
    load_hashrate,
    load_table,
    load_workers,
)
from .pipeline import PipelineConfig, PipelineError, comparison_report, emit_series, read_daily_csv, run_pipeline
from .plotting import FIGURES, PlotError, plot_daily, plot_regions
from .records import ValidationError

log = logging.getLogger("ethemissions")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=default, help="INI config file; flags override its keys")
    p.add_argument("--out", metavar="DIR", default=default, help="output directory (default: out)")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False, help="only log warnings")
    return p


def _dataset_flags(p: argparse.ArgumentParser, keys: Sequence[str]) -> None:
    for key in keys:
        flag = "--" + key.replace("_", "-")
        if key in PATH_KEYS:
            p.add_argument(flag, dest=key, metavar="PATH", help=f"{key} file")
        elif key in RUN_KEYS:
            p.add_argument(flag, dest=key, metavar=key.upper(), help=f"[run] {key}")
        else:
            p.add_argument(flag, dest=key, type=float, metavar="X", help=f"[scenario] {key}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ethemissions", description="Energy and CO2 emissions estimates for proof-of-work Ethereum.", parents=[_global_flags(False)])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = [_global_flags(True)]

    p = sub.add_parser("fetch-blocks", parents=common, help="download block metadata over JSON-RPC")
    p.add_argument("--endpoint", required=True, help="JSON-RPC URL")
    p.add_argument("--start", type=int, required=True, help="first block height")
    p.add_argument("--end", type=int, required=True, help="last block height (inclusive)")
    p.add_argument("--output", metavar="PATH", help="blocks.csv path (default: OUT/blocks.csv)")
    p.add_argument("--rate", type=float, default=10.0, help="max requests per second (default 10)")
    p.add_argument("--concurrency", type=int, default=4, help="concurrent requests (default 4)")
    p.add_argument("--retries", type=int, default=5, help="retries per request (default 5)")
    p.add_argument("--backoff", type=float, default=0.5, help="initial retry delay in seconds (default 0.5)")

    p = sub.add_parser("ingest", parents=common, help="validate a dataset and write its canonical CSV")
    p.add_argument("schema", choices=("hashrate", "blocks", "benchmarks", "workers", *TABLE_SCHEMAS))
    p.add_argument("input", help="input file")
    p.add_argument("--source", default="etherscan", help="hashrate source tag")
    p.add_argument("--gap-policy", default="reject", help="hashrate gap policy: reject or forward-fill")
    p.add_argument("--etherscan-export", action="store_true", help="input is Etherscan's Date(UTC),UnixTimeStamp,Value export")
    p.add_argument("--unit", default="GH/s", choices=("MH/s", "GH/s", "TH/s"), help="unit of the export Value column")

    p = sub.add_parser("fit-efficiency", parents=common, help="fit the efficiency trend from benchmarks")
    _dataset_flags(p, ("benchmarks",))

    p = sub.add_parser("classify", parents=common, help="attribute blocks to regions and emissions factors")
    _dataset_flags(p, ("blocks", "factors", "pool_regions", "region_grid_map", "patterns", "pool_addresses"))

    p = sub.add_parser("estimate", parents=common, help="run the daily energy and emissions pipeline")
    _dataset_flags(p, (*PATH_KEYS, *[k for k in RUN_KEYS if k != "out"], *SCENARIO_KEYS))

    p = sub.add_parser("report", parents=common, help="comparison reports over daily.csv")
    p.add_argument("--daily", metavar="PATH", required=True, help="daily.csv from estimate")
    p.add_argument("--mode", required=True, choices=("fixed_factor", "period_sum"))
    p.add_argument("--factor", type=float, action="append", required=True, help="gCO2/kWh; repeat for period_sum")
    p.add_argument("--start", type=dt.date.fromisoformat, help="first day (inclusive)")
    p.add_argument("--end", type=dt.date.fromisoformat, help="last day (inclusive)")

    p = sub.add_parser("plot", parents=common, help="write an SVG figure")
    p.add_argument("--figure", required=True, help=f"one of: {', '.join(FIGURES)}")
    p.add_argument("--daily", metavar="PATH", help="daily.csv from estimate")
    p.add_argument("--attributions", metavar="PATH", help="attributions.csv (regions figure)")
    p.add_argument("--hours-per-year", type=float, default=8766.0, help="annualization convention (default 8766)")
    return parser


def _run_config(args) -> RunConfig:
    file_values = read_config_file(args.config) if args.config else {}
    cli = {k: getattr(args, k, None) for k in (*PATH_KEYS, *RUN_KEYS, *SCENARIO_KEYS)}
    if args.out is not None:
        cli["out"] = args.out
    return build_config(file_values, cli)


def _out_dir(args, cfg: Optional[RunConfig] = None) -> Path:
    out = Path(args.out or (cfg.out if cfg else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _attributor(cfg: RunConfig) -> Attributor:
    return Attributor(
        load_table(cfg.path("patterns"), "patterns"),
        load_table(cfg.path("pool_regions"), "pool_regions"),
        load_table(cfg.path("pool_addresses"), "pool_addresses"),
        load_table(cfg.path("region_grid_map"), "region_grid_map"),
        load_table(cfg.path("factors"), "factors"),
    )


def _attribute(cfg: RunConfig):
    blocks = load_blocks(cfg.path("blocks"))
    try:
        return _attributor(cfg).attribute_all(blocks)
    except KeyError as exc:
        raise ValidationError(f"{exc.args[0]}; extend the factor table ({cfg.path('factors')}) to cover it") from None


def cmd_fetch_blocks(args) -> int:
    out = Path(args.output) if args.output else _out_dir(args) / "blocks.csv"
    client = RpcClient(args.endpoint, rate=args.rate, retries=args.retries, backoff=args.backoff)
    n = fetch_blocks(client, args.start, args.end, out, concurrency=args.concurrency)
    log.info("wrote %d blocks to %s", n, out)
    return EXIT_OK


def cmd_ingest(args) -> int:
    out = _out_dir(args) / f"{args.schema}.csv"
    schema, src = args.schema, args.input
    if schema == "hashrate":
        if args.etherscan_export:
            pairs = convert_etherscan_export(src, args.unit)
            text = "date,hashrate_ths\n" + "".join(f"{d.isoformat()},{fmt_num(v)}\n" for d, v in pairs)
            out.write_text(text, encoding="utf-8")
            src = out
        rows = load_hashrate(src, args.source, args.gap_policy)
        dump_hashrate(rows, out)
    elif schema == "blocks":
        rows = load_blocks(src)
        dump_blocks(rows, out)
    elif schema == "benchmarks":
        rows = load_benchmarks(src)
        dump_benchmarks(rows, out)
    elif schema == "workers":
        rows = load_workers(src)
        dump_workers(rows, out)
    else:
        rows = load_table(src, schema)
        dump_table(rows, schema, out)
    n = len(getattr(rows, "rows", None) or getattr(rows, "entries", None) or rows)
    print(f"{schema}: {n} records -> {out}")
    return EXIT_OK


def cmd_fit_efficiency(args) -> int:
    cfg = _run_config(args)
    cfg.validate()
    model = fit_efficiency_trend(load_benchmarks(cfg.path("benchmarks")))
    out = _out_dir(args, cfg) / "efficiency_model.json"
    out.write_text(model.to_json(), encoding="utf-8")
    for day in (model.window_start, model.window_end):
        low, best, high = efficiency_at(model, day)
        print(f"{day}: {best:.4f} MH/s/W (low {low:.4f}, high {high:.4f})")
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _run_config(args)
    cfg.validate(required=("blocks",))
    attributions = _attribute(cfg)
    out = _out_dir(args, cfg) / "attributions.csv"
    dump_attributions(attributions, out)
    cov = coverage(attributions)
    print(" ".join(f"{k}={v:.4f}" for k, v in cov.items()))
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _run_config(args)
    required = ("hashrate",) if cfg.fixed_factor is not None else ("hashrate", "blocks")
    cfg.validate(required=required)
    hashrate = load_hashrate(cfg.path("hashrate"), cfg.hashrate_source, cfg.gap_policy)
    if cfg.path("model") is not None:
        model = EfficiencyModel.from_json(Path(cfg.path("model")).read_text(encoding="utf-8"))
    else:
        model = fit_efficiency_trend(load_benchmarks(cfg.path("benchmarks")))
    out = _out_dir(args, cfg)
    attributions = None
    if cfg.fixed_factor is None:
        attributions = _attribute(cfg)
        dump_attributions(attributions, out / "attributions.csv")
    pcfg = PipelineConfig(
        scenarios=cfg.scenarios(),
        hours_per_year=cfg.hours_per_year,
        smoothing_days=cfg.smoothing_days,
        start=cfg.start,
        end=cfg.end,
        fixed_factor=cfg.fixed_factor,
        workers=cfg.workers,
    )
    result = run_pipeline(hashrate, model, attributions, pcfg)
    emit_series(result.daily, result.summary, out, config={**cfg.as_dict(), **pcfg.fingerprint_dict()})
    s = result.summary
    print(
        f"{s.start}..{s.end}: energy {s.energy_twh[1]:.4f} TWh ({s.energy_twh[0]:.4f}-{s.energy_twh[2]:.4f}), "
        f"emissions {s.emissions_mt[1]:.4f} MtCO2 ({s.emissions_mt[0]:.4f}-{s.emissions_mt[2]:.4f})"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    daily = read_daily_csv(args.daily)
    report = comparison_report(daily, args.mode, args.factor, args.start, args.end)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    (_out_dir(args) / f"report_{args.mode}.json").write_text(text, encoding="utf-8")
    if args.mode == "period_sum":
        for row in report["totals"]:
            t = row["total_mtco2"]
            print(f"{row['factor_gco2_kwh']:g} gCO2/kWh: {t['best']:.4f} MtCO2 ({t['low']:.4f}-{t['high']:.4f})")
    else:
        t = report["total_mtco2"]
        print(f"{args.factor[0]:g} gCO2/kWh: {t['best']:.4f} MtCO2 ({t['low']:.4f}-{t['high']:.4f})")
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.figure not in FIGURES:
        raise PlotError(f"unknown figure {args.figure!r}; valid names: {', '.join(FIGURES)}")
    if args.figure == "regions":
        if not args.attributions:
            raise ValidationError("the regions figure needs --attributions")
        svg = plot_regions(load_attributions(args.attributions))
    else:
        if not args.daily:
            raise ValidationError(f"the {args.figure} figure needs --daily")
        svg = plot_daily(read_daily_csv(args.daily), args.figure, args.hours_per_year)
    out = _out_dir(args) / f"{args.figure}.svg"
    out.write_text(svg, encoding="utf-8")
    print(out)
    return EXIT_OK


COMMANDS = {
    "fetch-blocks": cmd_fetch_blocks,
    "ingest": cmd_ingest,
    "fit-efficiency": cmd_fit_efficiency,
    "classify": cmd_classify,
    "estimate": cmd_estimate,
    "report": cmd_report,
    "plot": cmd_plot,
}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    message = " ".join(str(exc).split()) or type(exc).__name__
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_VALIDATION)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, IngestError, PipelineError, PlotError, ValueError, KeyError) as exc:
        return _fail("validation", exc, EXIT_VALIDATION)
    except (FetchError, OSError, RuntimeError) as exc:
        return _fail("runtime", exc, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
