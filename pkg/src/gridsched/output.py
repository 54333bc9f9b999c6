"""Result files written by ``gridsched run``."""

from __future__ import annotations

import csv
import json
import os

from .errors import InvariantViolation
from .model import Request
from .profile import INF
from .scheduler import Scheduler
from .sim import SimEvent, SimulationReport

SCHEDULE_COLUMNS = ["request_id", "user", "kind", "priority", "path", "start", "end", "bandwidth_kbps",
                    "status", "constraint", "bw_modifications", "reschedules", "finish_status",
                    "finish_time"]
UTILIZATION_COLUMNS = ["link_id", "begin", "end", "reserved_kbps"]


def human_time(ms) -> str:
    if ms == INF:
        return "inf"
    seconds, milli = divmod(int(ms), 1000)
    minutes, sec = divmod(seconds, 60)
    hours, minute = divmod(minutes, 60)
    return f"{hours}:{minute:02d}:{sec:02d}.{milli:03d}"


def _t(value, human: bool):
    if value is None or value == "":
        return ""
    if value == INF:
        return "inf"
    return human_time(value) if human else value


def _rows(profile_rows):
    return [[b, "inf" if e == INF else e, avail, reqs] for b, e, avail, reqs in profile_rows]


def snapshot(event: SimEvent, scheduler: Scheduler, seq: int) -> dict:
    """Full interval tables after ``event``."""
    return {
        "seq": seq,
        "time": event.time,
        "event": event.kind.name,
        "payload": event.payload,
        "links": {lid: _rows(p.rows()) for lid, p in sorted(scheduler.links.items())},
        "paths": {p.key: _rows(scheduler.path_profile(p).rows()) for p in scheduler.paths_in_use()},
        "requests": [{"id": r.id, "status": r.status.value, "bandwidth": r.bandwidth,
                      "start": r.start, "end": r.end}
                     for r in sorted(scheduler.requests.values(), key=lambda r: r.id)],
    }


class SnapshotWriter:
    def __init__(self, path: str):
        self._fh = open(path, "w", encoding="utf-8")
        self._seq = 0

    def __call__(self, event: SimEvent, scheduler: Scheduler) -> None:
        self._fh.write(json.dumps(snapshot(event, scheduler, self._seq)) + "\n")
        self._seq += 1

    def close(self) -> None:
        self._fh.close()


def schedule_row(r: Request, human: bool = False) -> dict:
    placed = r.path is not None
    return {
        "request_id": r.id, "user": r.user, "kind": r.kind.value, "priority": r.priority,
        "path": r.path.key if placed else "",
        "start": _t(r.start, human) if placed else "",
        "end": _t(r.end, human) if placed else "",
        "bandwidth_kbps": r.bandwidth if placed else "",
        "status": r.status.value, "constraint": str(r.constraint),
        "bw_modifications": r.bw_modification_count, "reschedules": r.reschedule_count,
        "finish_status": r.finish_status, "finish_time": _t(r.finish_time, human),
    }


def write_schedule(path: str, report: SimulationReport, human: bool = False) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, SCHEDULE_COLUMNS)
        writer.writeheader()
        for rid in sorted(report.requests):
            writer.writerow(schedule_row(report.requests[rid], human))


def utilization_rows(scheduler: Scheduler) -> list[tuple[str, int, int, int]]:
    rows = []
    for lid, prof in sorted(scheduler.links.items()):
        for iv in prof.intervals:
            if iv.end != INF:
                rows.append((lid, iv.begin, iv.end, prof.base_capacity - iv.available))
    return rows


def write_utilization(path: str, scheduler: Scheduler, human: bool = False) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(UTILIZATION_COLUMNS)
        for lid, b, e, reserved in utilization_rows(scheduler):
            writer.writerow([lid, _t(b, human), _t(e, human), reserved])


def check_utilization(scheduler: Scheduler) -> None:
    for lid, b, e, reserved in utilization_rows(scheduler):
        cap = scheduler.topology.links[lid].capacity
        if not 0 <= reserved <= cap:
            raise InvariantViolation(f"link {lid} reserves {reserved} > {cap} kbps on [{b}, {e})")


def write_cascades(path: str, report: SimulationReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(json.dumps(record) + "\n" for record in report.cascades)


def write_all(out_dir: str, report: SimulationReport, scheduler: Scheduler,
              human: bool = False) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_schedule(os.path.join(out_dir, "schedule.csv"), report, human)
    write_utilization(os.path.join(out_dir, "utilization.csv"), scheduler, human)
    write_cascades(os.path.join(out_dir, "cascade.log"), report)
