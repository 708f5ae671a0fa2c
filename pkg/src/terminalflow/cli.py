"""Command-line entry point: ``terminalflow simulate`` and ``terminalflow compare``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .compare import IncompatibleRuns, compare_scenarios
from .config import CONFIG_ERRORS, ConfigError, parse_config
from .runner import SimulationFailed, run_replications

log = logging.getLogger("terminalflow")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="terminalflow",
                                     description="Departing-passenger flow simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run replications of one scenario")
    sim.add_argument("--scenario", required=True, type=Path)
    sim.add_argument("--flights", required=True, type=Path)
    sim.add_argument("--layout", required=True, type=Path)
    sim.add_argument("--out", required=True, type=Path)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--replications", type=int)
    sim.add_argument("--foreign-fraction", type=float)
    sim.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    sim.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    cmp_ = sub.add_parser("compare", help="rank completed scenario runs")
    cmp_.add_argument("--runs", required=True, nargs="+", type=Path)
    cmp_.add_argument("--out", required=True, type=Path)
    cmp_.add_argument("--no-figures", action="store_true")
    return parser


def _simulate(args) -> int:
    try:
        plan = parse_config(args.scenario, args.flights, args.layout)
        sc = plan.scenario
        if args.seed is not None:
            sc.seed = args.seed
        if args.replications is not None:
            if args.replications < 1:
                raise ConfigError("--replications: must be >= 1")
            sc.replications = args.replications
        if args.foreign_fraction is not None:
            if not 0.0 <= args.foreign_fraction <= 1.0:
                raise ConfigError("--foreign-fraction: must lie in [0, 1]")
            sc.foreign_fraction = args.foreign_fraction
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        results = run_replications(plan, args.out, jobs=args.jobs, figures=not args.no_figures)
    except SimulationFailed as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    means = [r.summary["overall.mean"] for r in results if r.summary["overall.mean"] is not None]
    if means:
        log.info("%s: %d replications, mean boarding time %.1f min",
                 sc.name, len(results), sum(means) / len(means) / 60.0)
    print(f"wrote {len(results)} replications to {args.out}")
    return EXIT_OK


def _compare(args) -> int:
    try:
        report, _ = compare_scenarios(args.runs, args.out, figure=not args.no_figures)
    except (IncompatibleRuns, ValueError, OSError, KeyError) as exc:
        print(f"compare error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(report, end="")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = _build_parser().parse_args(argv)
    if args.command == "simulate":
        return _simulate(args)
    return _compare(args)


if __name__ == "__main__":
    sys.exit(main())
