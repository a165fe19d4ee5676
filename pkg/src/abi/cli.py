"""Command-line interface.

Subcommands: ``run`` (seeded experiment grids), ``stats`` (grouped
descriptive statistics), ``latinsquare`` (counterbalanced orderings),
``serve`` (playground protocol), ``dropspace`` (shared-space protocol).
``ABI_SEED`` overrides the master seed and ``ABI_LOG`` the log level.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import harness, serve


def _parse_number(text: str) -> float:
    """Accept plain decimals and fractions like 1/3."""
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _levels(text: str, convert) -> list:
    return [convert(part) for part in text.split(",") if part]


def _build_config(args) -> harness.ExperimentConfig:
    if args.config:
        config = harness.ExperimentConfig.from_file(args.config)
        if args.technique and args.technique != config.technique:
            raise SystemExit(
                f"--config is for {config.technique!r}, not {args.technique!r}"
            )
    else:
        factors: dict[str, list] = {}
        if args.lanes:
            factors["lanes"] = _levels(args.lanes, int)
        if args.selection_time:
            factors["selection_time"] = _levels(args.selection_time, _parse_number)
        if args.rows:
            factors["rows"] = _levels(args.rows, int)
        if args.cols:
            factors["cols"] = _levels(args.cols, int)
        if args.mode:
            factors["mode"] = _levels(args.mode, str)
        if args.layers:
            factors["layers"] = _levels(args.layers, int)
        config = harness.ExperimentConfig(
            technique=args.technique,
            factors=factors,
            trials=args.trials,
            seed=args.seed,
        )
    if args.trials is not None and args.config:
        config.trials = args.trials
    if args.seed is not None and args.config:
        config.seed = args.seed
    env_seed = os.environ.get("ABI_SEED")
    if env_seed is not None:
        config.seed = int(env_seed)
    if args.out:
        config.out = args.out
    return config


def _cmd_run(args) -> int:
    config = _build_config(args)
    records = harness.run_experiment(config, workers=args.workers)
    if config.out:
        harness.export_records(records, config.out, fmt=args.format)
        print(f"{len(records)} records -> {config.out}")
    else:
        for record in records:
            sys.stdout.write(harness.record_to_json(record) + "\n")
    return 0


def _cmd_stats(args) -> int:
    records = harness.load_records(args.records)
    group_by = [k for k in args.group_by.split(",") if k]
    stats = harness.describe(records, group_by, args.metric)
    if args.out:
        harness.export_stats(stats, group_by, args.out)
        print(f"{len(stats)} groups -> {args.out}")
    else:
        for key, s in stats.items():
            label = ", ".join(f"{k}={v}" for k, v in zip(group_by, key))
            ci = f" ci95=[{s.ci95[0]:.4f}, {s.ci95[1]:.4f}]" if s.ci95 else ""
            sd = f" sd={s.sd:.4f} se={s.se:.4f}" if s.sd is not None else ""
            print(f"{label}: n={s.n} mean={s.mean:.4f}{sd}{ci}")
    return 0


def _cmd_latinsquare(args) -> int:
    for row in harness.balanced_latin_square(args.n):
        print(" ".join(str(v) for v in row))
    return 0


def _cmd_serve(args) -> int:
    static = args.static
    if static is None and args.http_port is not None:
        candidate = Path(__file__).resolve().parents[2] / "frontend"
        static = str(candidate) if candidate.is_dir() else None
    try:
        asyncio.run(
            serve.run_playground(
                args.host, args.port, args.technique,
                http_port=args.http_port, static_dir=static,
            )
        )
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_dropspace(args) -> int:
    feed = serve.load_feed(args.feed) if args.feed else None
    try:
        asyncio.run(serve.run_dropspace(args.host, args.port, rate=args.rate, feed=feed))
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abi", description="Body-movement interaction engines and experiment harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded experiment grid")
    run.add_argument("technique", nargs="?", choices=harness.TECHNIQUES)
    run.add_argument("--config", help="JSON experiment config file")
    run.add_argument("--lanes", help="comma-separated lane counts (walkline)")
    run.add_argument(
        "--selection-time",
        dest="selection_time",
        help="comma-separated selection times, fractions allowed (walkline)",
    )
    run.add_argument("--rows", help="comma-separated row counts (foottap)")
    run.add_argument("--cols", help="comma-separated column counts (foottap)")
    run.add_argument("--mode", help="foottap mode levels: direct,indirect")
    run.add_argument("--layers", help="comma-separated layer counts (proximity)")
    run.add_argument("--trials", type=int, default=None, help="trials per condition cell")
    run.add_argument("--seed", type=int, default=None, help="master seed")
    run.add_argument("--out", help="output path (.jsonl or .csv)")
    run.add_argument("--format", choices=("csv", "jsonl"), default=None)
    run.add_argument("--workers", type=int, default=1)
    run.set_defaults(func=_cmd_run)

    stats = sub.add_parser("stats", help="grouped descriptive statistics")
    stats.add_argument("records", help="records file (.jsonl or .csv)")
    stats.add_argument("--group-by", dest="group_by", required=True)
    stats.add_argument("--metric", default="success")
    stats.add_argument("--out", help="output CSV path")
    stats.set_defaults(func=_cmd_stats)

    latin = sub.add_parser("latinsquare", help="print a balanced ordering matrix")
    latin.add_argument("n", type=int)
    latin.set_defaults(func=_cmd_latinsquare)

    srv = sub.add_parser("serve", help="playground protocol server")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, required=True)
    srv.add_argument("--technique", choices=harness.TECHNIQUES)
    srv.add_argument(
        "--http-port", dest="http_port", type=int, default=None,
        help="also serve the playground assets and a /ws bridge here",
    )
    srv.add_argument("--static", help="static asset directory for --http-port")
    srv.set_defaults(func=_cmd_serve)

    drops = sub.add_parser("dropspace", help="shared drop-space protocol server")
    drops.add_argument("--host", default="127.0.0.1")
    drops.add_argument("--port", type=int, required=True)
    drops.add_argument("--rate", type=float, default=serve.BROADCAST_RATE)
    drops.add_argument("--feed", help="JSON feed of timed content items")
    drops.set_defaults(func=_cmd_dropspace)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ABI_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and not args.config and not args.technique:
        parser.error("run needs a technique or --config")
    if args.command == "run" and args.trials is None and not args.config:
        args.trials = 10
    if args.command == "run" and args.seed is None and not args.config:
        args.seed = 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
