"""Command line: ``pairbandit run --config PATH --out DIR [--seed N] [--reps N] [--plot]``."""

from __future__ import annotations

import argparse
import sys
from importlib import resources

from pairbandit.errors import ConfigError
from pairbandit.harness.config import load_config
from pairbandit.harness.runner import run_experiment


def shipped_configs() -> list[str]:
    root = resources.files("pairbandit.harness") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def _resolve(path: str):
    """Accept a file path, or the bare name of a shipped config."""
    if path in shipped_configs():
        return resources.files("pairbandit.harness") / "configs" / path
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairbandit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True, help="config JSON path or shipped config name")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--reps", type=int, help="override the replication count")
    run.add_argument("--plot", action="store_true", help="also write plot.svg")
    run.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    sub.add_parser("configs", help="list shipped configs")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "configs":
        print("\n".join(shipped_configs()))
        return 0
    try:
        cfg = load_config(_resolve(args.config)).with_overrides(args.seed, args.reps)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.reps is not None and args.reps < 1:
        print("config error: --reps must be positive", file=sys.stderr)
        return 2
    try:
        rows = run_experiment(cfg, args.out, plot=args.plot, workers=args.workers)
    except KeyboardInterrupt:
        print("interrupted; partial results written", file=sys.stderr)
        return 130
    print(f"{len(rows)} runs written to {args.out}")
    return 0
