"""Command-line front end: run scenarios, drills and report on traces."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .config import WorkcellConfig
from .errors import ServoError
from .harness import (
    format_report,
    report,
    run_scenario,
    simulate_marker_calibration,
    tracking_accuracy_experiment,
)
from .scenarios import MODES, builtin_scenario, load_scenario
from .trace import RunTrace


def _load_config(path: Optional[str]) -> WorkcellConfig:
    return WorkcellConfig() if path is None else WorkcellConfig.load(path)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    cell = config.build()
    if args.scenario in ("ball", "bullseye"):
        scenario = builtin_scenario(
            args.scenario, cell, mode=args.mode or "hybrid"
        )
    else:
        scenario = load_scenario(args.scenario)
        if args.mode is not None:
            scenario.mode = args.mode
    trace = run_scenario(
        config,
        scenario,
        seed=args.seed,
        detail=args.detail,
        timeout=args.timeout,
    )
    if args.out is not None:
        trace.save(args.out)
    print(format_report(report([trace])))
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    result = simulate_marker_calibration(
        config, locations=args.locations, seed=args.seed
    )
    print(json.dumps(result, indent=2))
    return 0


def _cmd_accuracy(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    result = tracking_accuracy_experiment(config, args.source, seed=args.seed)
    print(json.dumps(result, indent=2))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    traces = [RunTrace.load(path) for path in args.traces]
    print(format_report(report(traces)))
    return 0


def _cmd_config(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    sys.stdout.write(config.dumps_json() if args.json else config.dumps())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridservo",
        description="Deterministic visual-servoing simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and report its outcomes")
    run.add_argument(
        "--scenario",
        required=True,
        help="'ball', 'bullseye', or path to a scenario JSON file",
    )
    run.add_argument(
        "--mode",
        choices=MODES,
        default=None,
        help="servoing mode (default: hybrid, or the file's own mode)",
    )
    run.add_argument("--seed", type=int, default=None,
                     help="run seed (default: config 'seed')")
    run.add_argument("--config", default=None, help="config file path")
    run.add_argument("--out", default=None, help="write the trace here (JSONL)")
    run.add_argument("--detail", choices=("summary", "full"), default="summary",
                     help="trace detail level")
    run.add_argument("--timeout", type=float, default=None,
                     help="per-action timeout in virtual seconds")
    run.set_defaults(func=_cmd_run)

    calibrate = sub.add_parser(
        "calibrate", help="sphere-marker registration drill"
    )
    calibrate.add_argument("--locations", type=int, default=12,
                           help="marker locations to show (>= 4)")
    calibrate.add_argument("--seed", type=int, default=None)
    calibrate.add_argument("--config", default=None)
    calibrate.set_defaults(func=_cmd_calibrate)

    accuracy = sub.add_parser(
        "accuracy", help="per-source tracking accuracy experiment"
    )
    accuracy.add_argument("--source", choices=("etoh", "einh"), required=True)
    accuracy.add_argument("--seed", type=int, default=None)
    accuracy.add_argument("--config", default=None)
    accuracy.set_defaults(func=_cmd_accuracy)

    rep = sub.add_parser("report", help="pooled statistics over saved traces")
    rep.add_argument("traces", nargs="+", help="trace files from 'run --out'")
    rep.set_defaults(func=_cmd_report)

    cfg = sub.add_parser("config", help="print the effective configuration")
    cfg.add_argument("--config", default=None)
    cfg.add_argument("--json", action="store_true", help="emit JSON")
    cfg.set_defaults(func=_cmd_config)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ServoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
