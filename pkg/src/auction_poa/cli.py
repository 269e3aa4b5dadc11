"""Command line entry point: ``auction-poa <subcommand> --config FILE``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import ConfigError, load_config, rows_to_csv, run_suite

SUBCOMMANDS = {
    "poa": "instance PoA estimates",
    "eq-check": "epsilon-equilibrium checks on a bid grid",
    "smooth-check": "smoothness certificates on case grids",
    "learn": "repeated play by no-regret learners",
    "compose-check": "smoothness of composed item auctions",
    "suite": "every experiment in the config, whatever its kind",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="auction-poa", description="Auction welfare experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON experiment or suite file")
        p.add_argument("--seed", type=int, default=None, help="override every experiment's seed")
        p.add_argument("--samples", type=int, default=None, help="override every experiment's sample count")
        p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
        p.add_argument("--jobs", type=int, default=1, help="experiments run in parallel processes")
        if name in ("poa", "suite"):
            p.add_argument("--exhaustive", action="store_true",
                           help="enumerate discrete priors exactly instead of sampling")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        experiments = load_config(args.config)
    except (OSError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if args.command != "suite":
        experiments = [e for e in experiments if e.kind == args.command]
        if not experiments:
            print(f"error: {args.config} has no '{args.command}' experiments", file=sys.stderr)
            return 2
    if getattr(args, "exhaustive", False):
        experiments = [replace(e, spec=dict(e.spec, exhaustive=True)) if e.kind == "poa" else e
                       for e in experiments]
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return 2
    rows = run_suite(experiments, jobs=args.jobs, seed=args.seed, samples=args.samples)
    if args.out:
        rows_to_csv(rows, args.out)
    else:
        rows_to_csv(rows, sys.stdout)
    failed = [r.experiment for r in rows if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
