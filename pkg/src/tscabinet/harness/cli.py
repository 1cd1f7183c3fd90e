"""Command-line entry point: ``tscabinet <command> [options]``.

Exit status is 0 on success, 1 for a bad configuration or bad arguments,
and 2 when a run fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from ..workload import write_workload
from .config import ConfigError, ExperimentConfig, load_config
from .dataset import IngestError, ingest_csv, synthetic_store, write_csv
from .experiment import SimulationError, build_scenario, run_experiment, sweep
from .report import REPORT_FILE, emit_report, read_report_csv, summary_text

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that status is reserved for run failures
    def error(self, message: str):
        raise _UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(prog="tscabinet", description="Hot/cold tier placement simulator for time-series data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="load a sensor CSV, or write the synthetic one")
    p.add_argument("csv", nargs="?", help="CSV to load; omit to generate the synthetic dataset")
    p.add_argument("--out", help="write the (normalised) dataset CSV here")

    p = sub.add_parser("generate-workload", parents=[common], help="write the generated query workload")
    p.add_argument("--out", help="workload file to write (required unless --print-config)")

    for name, text in (("run", "simulate the configured policies at one capacity"), ("sweep", "run over capacities")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--policy", action="append", help="policy to run (repeatable); default: configured list")
        p.add_argument("--out", help="output directory for the report files (required unless --print-config)")
        p.add_argument("--no-plan-log", action="store_true", help="skip the per-run migration logs")
        if name == "run":
            p.add_argument("--capacity", type=int, help="CLOUD+EDGE capacity in points")
        else:
            p.add_argument("--capacity", type=_int_list, required=True, help="comma-separated, strictly increasing")
            p.add_argument("--workers", type=int, default=1, help="capacities simulated in parallel")

    p = sub.add_parser("report", help="print the summary of an existing report")
    p.add_argument("--out", required=True, help="directory holding report.csv")
    return parser


def _config(args: argparse.Namespace) -> ExperimentConfig:
    overrides: dict[str, object] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "policy", None):
        overrides["policies"] = ",".join(args.policy)
    return load_config(args.config, overrides)


def _ingest(cfg: ExperimentConfig, args: argparse.Namespace) -> None:
    store = ingest_csv(args.csv) if args.csv else synthetic_store(
        cfg.dataset_series, cfg.dataset_days, cfg.dataset_step, seed=cfg.seed
    )
    print(
        f"{store.n_series} series, {store.n_points} points, {store.start}..{store.end}, "
        f"{store.malformed} malformed rows skipped"
    )
    if args.out:
        write_csv(store, args.out)
        print(f"wrote {args.out}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")

    if args.command == "report":
        try:
            sys.stdout.write(summary_text(read_report_csv(Path(args.out) / REPORT_FILE)))
        except (OSError, ValueError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK

    try:
        cfg = _config(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    if args.command != "ingest" and not args.out:
        print(f"tscabinet {args.command}: --out is required", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "sweep":
        caps = args.capacity
        if not caps or any(b <= a for a, b in zip(caps, caps[1:])):
            print(f"config error: capacities must be strictly increasing, got {caps}", file=sys.stderr)
            return EXIT_CONFIG

    try:
        if args.command == "ingest":
            _ingest(cfg, args)
        elif args.command == "generate-workload":
            scn = build_scenario(cfg)
            write_workload(scn.queries, args.out)
            print(f"wrote {len(scn.queries)} queries to {args.out}")
        elif args.command == "run":
            report = run_experiment(cfg, capacity=args.capacity, keep_log=not args.no_plan_log)
            emit_report(report, args.out, plan_logs=not args.no_plan_log)
        elif args.command == "sweep":
            reports = sweep(cfg, args.capacity, workers=args.workers)
            emit_report(reports, args.out, plan_logs=False)
    except (SimulationError, IngestError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
