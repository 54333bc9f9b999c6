"""Command line entry point: ``gridsched validate`` and ``gridsched run``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import output
from . import scenario as scenario_io
from .errors import InvariantViolation, ScenarioInvalid
from .fuzz import random_scenario
from .model import RequestStatus

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INVARIANT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridsched",
                                     description="Bandwidth-reserving transfer scheduler and simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log scheduler decisions")
    sub = parser.add_subparsers(dest="command", required=True)

    val = sub.add_parser("validate", help="check a scenario file and report every problem")
    val.add_argument("scenario")

    run = sub.add_parser("run", help="simulate a scenario file, or a seeded random one with 'fuzz'")
    run.add_argument("scenario", help="scenario .jsonl path, or the word 'fuzz'")
    run.add_argument("--out", required=True, help="output directory (created if missing)")
    run.add_argument("--seed", type=int, default=0, help="seed for 'fuzz' (default 0)")
    run.add_argument("--floor", type=int, help="override the bandwidth floor in kbps")
    run.add_argument("--max-paths", type=int, help="override the number of candidate paths")
    run.add_argument("--human-times", action="store_true",
                     help="write h:mm:ss.mmm instead of milliseconds in the CSV files")
    return parser


def _load(path: str):
    try:
        return scenario_io.load(path), None
    except ScenarioInvalid as exc:
        return None, exc
    except OSError as exc:
        return None, ScenarioInvalid([f"{path}: {exc.strerror}"])


def _report_invalid(exc: ScenarioInvalid) -> int:
    for line in exc.errors:
        print(line, file=sys.stderr)
    print(f"{len(exc.errors)} problem(s) found", file=sys.stderr)
    return EXIT_INVALID


def cmd_validate(args) -> int:
    scn, err = _load(args.scenario)
    if err is not None:
        return _report_invalid(err)
    print(f"ok: {len(scn.nodes)} nodes, {len(scn.links)} links, {len(scn.submissions)} requests")
    return EXIT_OK


def cmd_run(args) -> int:
    if args.scenario == "fuzz":
        scn = random_scenario(args.seed)
    else:
        scn, err = _load(args.scenario)
        if err is not None:
            return _report_invalid(err)
    settings = scn.settings
    if args.floor is not None:
        settings = replace(settings, bandwidth_floor=args.floor)
    if args.max_paths is not None:
        settings = replace(settings, max_paths=args.max_paths)
    scn.settings = settings

    os.makedirs(args.out, exist_ok=True)
    if args.scenario == "fuzz":
        with open(os.path.join(args.out, "scenario.jsonl"), "w", encoding="utf-8") as fh:
            fh.write(scenario_io.dumps(scn))
    snapshots = output.SnapshotWriter(os.path.join(args.out, "snapshots.jsonl"))
    sim = scn.simulator()
    sim.on_event = snapshots
    try:
        report = sim.run()
        output.check_utilization(sim.scheduler)
    except InvariantViolation as exc:
        print(f"invariant violated at t={sim.now}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    finally:
        snapshots.close()
    output.write_all(args.out, report, sim.scheduler, human=args.human_times)
    done = sum(1 for r in report.requests.values() if r.status is RequestStatus.FINISHED)
    print(f"{len(report.requests)} requests, {done} finished, {len(report.cascades)} cascades, "
          f"end t={report.end_time} ms -> {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return cmd_validate(args) if args.command == "validate" else cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
