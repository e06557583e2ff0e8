"""Command-line driver: ``run``, ``gen`` and ``stats``.

Exit codes: 0 success, 1 a scenario did not adapt as expected, 2 bad
configuration.  ``SACRE_LOG`` (error, info, debug) sets log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ..loop import PolicyError
from ..reqmodel import ModelError
from ..vehicle import SCENARIOS, BudgetError, ScenarioTemplate, generate_scenario
from .report import read_report, reaggregate, write_report
from .runner import run_scenario
from .stats import aggregate

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("sacre")


class ConfigError(Exception):
    pass


def _configure_logging() -> None:
    name = os.environ.get("SACRE_LOG", "error").strip().lower()
    if name not in LOG_LEVELS:
        raise ConfigError(f"SACRE_LOG must be one of {', '.join(LOG_LEVELS)}, not {name!r}")
    logging.basicConfig(level=LOG_LEVELS[name], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sacre", description="Requirements-adaptation experiments "
                                "on a simulated smart vehicle.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run scenarios with replications and write a report")
    run.add_argument("--scenario", required=True, choices=SCENARIOS + ("all",))
    run.add_argument("--replications", type=int, default=20)
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--scale", type=float, default=0.1)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--realtime", action="store_true", help="pace the run in wall-clock time")

    gen = sub.add_parser("gen", help="generate a scenario's traces only")
    gen.add_argument("--scenario", required=True, choices=SCENARIOS)
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--scale", type=float, default=0.1)
    gen.add_argument("--out", type=Path, required=True)

    stats = sub.add_parser("stats", help="re-aggregate a persisted report")
    stats.add_argument("--in", dest="in_dir", type=Path, required=True)
    return p


def _print_metrics(metrics) -> None:
    for s in metrics.scenarios:
        if s.mean_response_ms is None:
            times = "no response times"
        else:
            times = f"{s.mean_response_ms:.2f} ms (sd {s.stddev_response_ms:.2f})"
        line = f"{s.key:<10} adapted {s.adapted}/{s.replications}  {times}"
        if s.mean_measures:
            m = s.mean_measures
            line += f"  P={m['precision']:.4f} R={m['recall']:.4f} F={m['f_measure']:.4f}"
        print(line)
    if metrics.ppmcc is not None:
        print(f"ppmcc(dataset size, response time) = {metrics.ppmcc:.4f}")
    elif metrics.ppmcc_note:
        print(f"ppmcc not computed: {metrics.ppmcc_note}")


def cmd_run(args) -> int:
    if args.replications < 0:
        raise ConfigError("--replications must be >= 0")
    scenarios = SCENARIOS if args.scenario == "all" else (args.scenario,)
    for sid in scenarios:
        ScenarioTemplate.scaled(sid, args.scale)
    results = []
    for sid in scenarios:
        results += run_scenario(sid, args.replications, args.seed, args.scale,
                                realtime=args.realtime, workdir=args.out / "runs")
    metrics = aggregate(results, seed=args.seed, scale=args.scale)
    write_report(args.out, results, metrics)
    _print_metrics(metrics)
    failed = [r for r in results if r.outcome != "adapted"]
    for r in failed:
        print(f"{r.scenario_id} r{r.replication_index}: {r.outcome}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_gen(args) -> int:
    spec = generate_scenario(ScenarioTemplate.scaled(args.scenario, args.scale), args.seed, args.out)
    print(json.dumps({"scenario": spec.id, "seed": spec.seed, "ticks": spec.total_ticks,
                      "injection_tick": spec.uncertainty_injection_tick,
                      "sensor_trace": str(spec.sensor_trace),
                      "driver_actions": str(spec.driver_actions)}, indent=2))
    return EXIT_OK


def cmd_stats(args) -> int:
    try:
        read_report(args.in_dir)
    except FileNotFoundError:
        raise ConfigError(f"no report in {args.in_dir}") from None
    metrics = reaggregate(args.in_dir)
    _print_metrics(metrics)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "gen": cmd_gen, "stats": cmd_stats}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        _configure_logging()
        return COMMANDS[args.command](args)
    except (ConfigError, BudgetError, ModelError, PolicyError, ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
