"""Scenario files: one JSON record per line.

Record types are ``settings``, ``node``, ``link`` and ``request``; blank
lines and lines starting with ``#`` are ignored. See ``docs/FORMATS.md``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ParseError, SemanticError
from .model import ConstraintKind, RequestKind, RequestSpec, TimeConstraint
from .scheduler import DEFAULT_BANDWIDTH_FLOOR, DEFAULT_MIN_EXTENSION
from .sim import AcceptPolicy, Simulator, Submission
from .topology import DEFAULT_MAX_PATHS, Topology


@dataclass(frozen=True)
class LinkSpec:
    id: str
    name: str
    source: str
    dest: str
    capacity: int


@dataclass(frozen=True)
class Settings:
    bandwidth_floor: int = DEFAULT_BANDWIDTH_FLOOR
    max_paths: int = DEFAULT_MAX_PATHS
    offer_expiry: int = 0
    min_extension: int = DEFAULT_MIN_EXTENSION

    def options(self) -> dict:
        return {"bandwidth_floor": self.bandwidth_floor, "max_paths": self.max_paths,
                "offer_expiry": self.offer_expiry, "min_extension": self.min_extension}


@dataclass
class Scenario:
    nodes: list[str] = field(default_factory=list)
    links: list[LinkSpec] = field(default_factory=list)
    submissions: list[Submission] = field(default_factory=list)
    settings: Settings = field(default_factory=Settings)

    def topology(self) -> Topology:
        topo = Topology()
        for name in self.nodes:
            topo.add_node(name)
        for link in self.links:
            topo.add_link(link.name, link.source, link.dest, link.capacity, link_id=link.id)
        return topo

    def simulator(self, **overrides) -> Simulator:
        options = {**self.settings.options(), **overrides}
        return Simulator(self.topology(), self.submissions, **options)


class _Checker:
    """Collects problems instead of stopping at the first one."""

    def __init__(self):
        self.errors: list[str] = []

    def fail(self, where: str, message: str) -> None:
        self.errors.append(f"{where}: {message}")

    def get(self, rec: dict, key: str, where: str, kinds, *, required=True, default=None,
            minimum=None):
        if key not in rec or rec[key] is None:
            if required:
                self.fail(f"{where}.{key}", "missing")
            return default
        value = rec[key]
        if isinstance(value, bool) or not isinstance(value, kinds):
            self.fail(f"{where}.{key}", f"expected {_kind_name(kinds)}, got {value!r}")
            return default
        if minimum is not None and value < minimum:
            self.fail(f"{where}.{key}", f"must be >= {minimum}, got {value}")
            return default
        return value


def _kind_name(kinds) -> str:
    kinds = kinds if isinstance(kinds, tuple) else (kinds,)
    return " or ".join(k.__name__ for k in kinds)


def parse_records(text: str) -> list[tuple[int, dict]]:
    records, errors = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            rec = json.loads(stripped)
        except json.JSONDecodeError as exc:
            errors.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        if not isinstance(rec, dict):
            errors.append(f"line {lineno}: record must be a JSON object")
            continue
        records.append((lineno, rec))
    if errors:
        raise ParseError(errors)
    return records


def _constraint(chk: _Checker, raw, where: str) -> TimeConstraint:
    if raw is None:
        return TimeConstraint()
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        chk.fail(where, f"expected an object, got {raw!r}")
        return TimeConstraint()
    try:
        kind = ConstraintKind(raw.get("kind", "NONE"))
    except ValueError:
        chk.fail(f"{where}.kind", f"unknown constraint {raw.get('kind')!r}")
        return TimeConstraint()
    bound = raw.get("bound")
    if kind.bounded:
        bound = chk.get(raw, "bound", where, int, minimum=0)
        if bound is None:
            return TimeConstraint()
        return TimeConstraint(kind, bound)
    if bound is not None:
        chk.fail(f"{where}.bound", f"{kind.value} takes no bound")
    return TimeConstraint(kind)


def _accept(chk: _Checker, raw, where: str) -> AcceptPolicy:
    if raw is None or raw == "first":
        return AcceptPolicy("first")
    if raw == "none":
        return AcceptPolicy("none")
    if isinstance(raw, dict) and isinstance(raw.get("index"), int) and raw["index"] >= 0:
        return AcceptPolicy("index", raw["index"])
    chk.fail(where, f'expected "first", "none" or {{"index": n}}, got {raw!r}')
    return AcceptPolicy("first")


def _request(chk: _Checker, rec: dict, where: str, nodes: set[str]) -> Submission | None:
    before = len(chk.errors)
    rid = chk.get(rec, "id", where, str)
    submit = chk.get(rec, "submit_time", where, int, minimum=0)
    user = chk.get(rec, "user", where, str)
    kind_raw = chk.get(rec, "kind", where, str, default="transfer", required=False)
    try:
        kind = RequestKind(kind_raw)
    except ValueError:
        chk.fail(f"{where}.kind", f"unknown request kind {kind_raw!r}")
        kind = RequestKind.TRANSFER
    source = chk.get(rec, "source", where, str)
    dest = chk.get(rec, "dest", where, str)
    for key, node in (("source", source), ("dest", dest)):
        if node is not None and node not in nodes:
            chk.fail(f"{where}.{key}", f"unknown node {node!r}")
    if source is not None and source == dest:
        chk.fail(where, "source and dest must differ")
    priority = chk.get(rec, "priority", where, int, required=False, default=0, minimum=0)
    is_transfer = kind is RequestKind.TRANSFER
    size = chk.get(rec, "size_kbit", where, int, required=is_transfer, minimum=1)
    bandwidth = chk.get(rec, "bandwidth_kbps", where, int, required=not is_transfer, minimum=1)
    start = chk.get(rec, "start", where, int, required=not is_transfer, minimum=0)
    duration = chk.get(rec, "duration", where, int, required=not is_transfer, minimum=1)
    if is_transfer:
        for key in ("start", "duration"):
            if key in rec:
                chk.fail(f"{where}.{key}", "only reservations take a start and duration")
    elif "size_kbit" in rec:
        chk.fail(f"{where}.size_kbit", "reservations carry no size")
    constraint = _constraint(chk, rec.get("constraint"), f"{where}.constraint")
    if not is_transfer and "constraint" in rec:
        chk.fail(f"{where}.constraint", "reservations are placed at their start; no constraint allowed")
    accept = _accept(chk, rec.get("accept"), f"{where}.accept")
    factor_raw = chk.get(rec, "throughput_factor", where, (int, float), required=False, default=1)
    factor = Fraction(str(factor_raw))
    if not 0 < factor <= 1:
        chk.fail(f"{where}.throughput_factor", f"must lie in (0, 1], got {factor_raw}")
        factor = Fraction(1)
    unknown = set(rec) - {"type", "id", "submit_time", "user", "kind", "source", "dest", "priority",
                          "size_kbit", "bandwidth_kbps", "start", "duration", "constraint",
                          "accept", "throughput_factor"}
    for key in sorted(unknown):
        chk.fail(f"{where}.{key}", "unknown field")
    if len(chk.errors) > before:
        return None
    spec = RequestSpec(rid, user, kind, source, dest, priority, size=size, bandwidth=bandwidth,
                       start=start, duration=duration, constraint=constraint,
                       throughput_factor=factor)
    return Submission(submit, spec, accept)


def loads(text: str) -> Scenario:
    """Parse and validate scenario text, raising with every problem found."""
    records = parse_records(text)
    chk = _Checker()
    scenario = Scenario()
    settings_seen = False
    nodes: set[str] = set()
    link_ids: set[str] = set()
    request_ids: set[str] = set()
    pending_requests = []

    for lineno, rec in records:
        rtype = rec.get("type")
        where = f"line {lineno}: {rtype or 'record'}"
        if rtype == "settings":
            if settings_seen:
                chk.fail(where, "settings given twice")
            settings_seen = True
            defaults = Settings()
            scenario.settings = Settings(
                chk.get(rec, "bandwidth_floor", where, int, required=False, minimum=1,
                        default=defaults.bandwidth_floor),
                chk.get(rec, "max_paths", where, int, required=False, minimum=1,
                        default=defaults.max_paths),
                chk.get(rec, "offer_expiry", where, int, required=False, minimum=0,
                        default=defaults.offer_expiry),
                chk.get(rec, "min_extension", where, int, required=False, minimum=1,
                        default=defaults.min_extension),
            )
        elif rtype == "node":
            name = chk.get(rec, "name", where, str)
            if name is not None:
                if not name:
                    chk.fail(f"{where}.name", "must be non-empty")
                elif name in nodes:
                    chk.fail(f"{where}.name", f"duplicate node {name!r}")
                else:
                    nodes.add(name)
                    scenario.nodes.append(name)
        elif rtype == "link":
            lid = chk.get(rec, "id", where, str)
            name = chk.get(rec, "name", where, str, required=False, default=lid)
            source = chk.get(rec, "source", where, str)
            dest = chk.get(rec, "dest", where, str)
            capacity = chk.get(rec, "capacity_kbps", where, int)
            ok = None not in (lid, source, dest, capacity)
            if capacity is not None and capacity <= 0:
                chk.fail(f"{where}.capacity_kbps", f"capacity must be > 0, got {capacity}")
                ok = False
            for key, node in (("source", source), ("dest", dest)):
                if node is not None and node not in nodes:
                    chk.fail(f"{where}.{key}", f"unknown node {node!r}")
                    ok = False
            if source is not None and source == dest:
                chk.fail(where, "source and dest must differ")
                ok = False
            if lid in link_ids:
                chk.fail(f"{where}.id", f"duplicate link {lid!r}")
                ok = False
            if ok:
                link_ids.add(lid)
                scenario.links.append(LinkSpec(lid, name, source, dest, capacity))
        elif rtype == "request":
            pending_requests.append((where, rec))
        else:
            chk.fail(where, f"unknown record type {rtype!r}")

    for where, rec in pending_requests:
        sub = _request(chk, rec, where, nodes)
        if sub is None:
            continue
        if sub.spec.id in request_ids:
            chk.fail(f"{where}.id", f"duplicate request {sub.spec.id!r}")
            continue
        request_ids.add(sub.spec.id)
        scenario.submissions.append(sub)

    if chk.errors:
        raise SemanticError(chk.errors)
    return scenario


def load(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def _request_record(sub: Submission) -> dict:
    spec = sub.spec
    rec = {"type": "request", "id": spec.id, "submit_time": sub.time, "user": spec.user,
           "kind": spec.kind.value, "source": spec.source, "dest": spec.dest,
           "priority": spec.priority}
    if spec.kind is RequestKind.TRANSFER:
        rec["size_kbit"] = spec.size
        if spec.bandwidth is not None:
            rec["bandwidth_kbps"] = spec.bandwidth
        c = spec.constraint
        rec["constraint"] = {"kind": c.kind.value} if c.bound is None else {
            "kind": c.kind.value, "bound": c.bound}
    else:
        rec.update(bandwidth_kbps=spec.bandwidth, start=spec.start, duration=spec.duration)
    if sub.accept.mode == "index":
        rec["accept"] = {"index": sub.accept.index}
    else:
        rec["accept"] = sub.accept.mode
    f = spec.throughput_factor
    rec["throughput_factor"] = int(f) if f.denominator == 1 else float(f)
    return rec


def dumps(scenario: Scenario) -> str:
    s = scenario.settings
    lines = [{"type": "settings", "bandwidth_floor": s.bandwidth_floor, "max_paths": s.max_paths,
              "offer_expiry": s.offer_expiry, "min_extension": s.min_extension}]
    lines += [{"type": "node", "name": n} for n in scenario.nodes]
    lines += [{"type": "link", "id": l.id, "name": l.name, "source": l.source, "dest": l.dest,
               "capacity_kbps": l.capacity} for l in scenario.links]
    lines += [_request_record(sub) for sub in scenario.submissions]
    return "".join(json.dumps(rec) + "\n" for rec in lines)
