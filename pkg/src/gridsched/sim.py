"""Discrete-event driver: virtual time, transfer progress and fault injection.

Events at the same instant run in kind order FINISH, DUE, START, SUBMIT,
ACCEPT, then by payload id. A transfer that completes exactly at its due
time is therefore never treated as overrunning.
"""

from __future__ import annotations

import enum
import heapq
import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from fractions import Fraction

from . import rescheduler
from .errors import CannotSchedule, ExpiredOffer, NoPath, UnknownOffer
from .model import Request, RequestKind, RequestSpec, RequestStatus
from .progress import recompute_finish, start_progress, update_progress
from .scheduler import Scheduler
from .topology import Topology

log = logging.getLogger(__name__)


class EventKind(enum.IntEnum):
    FINISH = 0
    DUE = 1
    START = 2
    SUBMIT = 3
    ACCEPT = 4


@dataclass(frozen=True, order=True)
class SimEvent:
    time: int
    kind: EventKind
    payload: str
    epoch: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AcceptPolicy:
    """``first`` accepts the best conforming offer, ``index`` picks one, ``none`` declines."""

    mode: str = "first"
    index: int = 0

    def __post_init__(self):
        if self.mode not in ("first", "index", "none"):
            raise ValueError(f"unknown accept policy {self.mode!r}")

    def __str__(self):
        return f"index:{self.index}" if self.mode == "index" else self.mode


FIRST = AcceptPolicy("first")


@dataclass(frozen=True)
class Submission:
    time: int
    spec: RequestSpec
    accept: AcceptPolicy = FIRST


@dataclass
class SimulationReport:
    requests: dict[str, Request]
    trace: list[SimEvent]
    cascades: list[dict]
    end_time: int

    def bandwidth_values(self, request_id: str) -> list[int]:
        return [bw for _, bw in self.requests[request_id].bandwidth_history]


class Simulator:
    def __init__(self, topology: Topology, submissions: list[Submission], *,
                 check: bool = True, on_event: Callable[[SimEvent, Scheduler], None] | None = None,
                 **scheduler_options):
        self.scheduler = Scheduler(topology, **scheduler_options)
        self.submissions = {s.spec.id: s for s in submissions}
        if len(self.submissions) != len(submissions):
            raise ValueError("duplicate request ids in submissions")
        self.check = check
        self.on_event = on_event
        self.trace: list[SimEvent] = []
        self._queue: list[SimEvent] = []
        self._epoch: dict[str, int] = {}
        self._synced: dict[str, tuple] = {}
        self._offers: dict[str, list[str]] = {}
        for s in submissions:
            self._push(s.time, EventKind.SUBMIT, s.spec.id)

    @property
    def now(self) -> int:
        return self.scheduler.now

    def _push(self, time: int, kind: EventKind, payload: str) -> None:
        heapq.heappush(self._queue, SimEvent(time, kind, payload, self._epoch.get(payload, 0)))

    def _stale(self, event: SimEvent) -> bool:
        if event.kind in (EventKind.SUBMIT, EventKind.ACCEPT):
            return False
        return event.epoch != self._epoch.get(event.payload, 0)

    def run(self) -> SimulationReport:
        """Process events until the queue drains."""
        s = self.scheduler
        while self._queue:
            event = heapq.heappop(self._queue)
            if self._stale(event):
                continue
            s.now = event.time
            s.expire_offers()
            handler = getattr(self, f"_on_{event.kind.name.lower()}")
            handler(event.payload)
            self._sync()
            self.trace.append(event)
            if self.check:
                s.verify()
            if self.on_event is not None:
                self.on_event(event, s)
        everything = {**s.discarded, **s.requests}
        return SimulationReport(everything, list(self.trace), list(s.cascades), s.now)

    # -- handlers --------------------------------------------------------

    def _on_submit(self, rid: str) -> None:
        try:
            offers = self.scheduler.submit(self.submissions[rid].spec)
        except (NoPath, CannotSchedule) as exc:
            log.info("submit %s rejected: %s", rid, exc)
            return
        self._offers[rid] = [o.offer_id for o in offers]
        self._push(self.now, EventKind.ACCEPT, rid)

    def _on_accept(self, rid: str) -> None:
        s = self.scheduler
        policy = self.submissions[rid].accept
        live = [s.offers[o] for o in self._offers.get(rid, []) if o in s.offers]
        if policy.mode == "first":
            chosen = next((o for o in live if o.conforming), None)
        elif policy.mode == "index":
            chosen = live[policy.index] if policy.index < len(live) else None
        else:
            chosen = None
        if chosen is None:
            if rid in s.requests and s.requests[rid].status is RequestStatus.OFFERED:
                s.decline(rid)
            return
        try:
            s.accept(chosen.offer_id)
        except (UnknownOffer, ExpiredOffer) as exc:
            log.info("accept %s failed: %s", rid, exc)

    def _on_start(self, rid: str) -> None:
        r = self.scheduler.requests[rid]
        if r.status is not RequestStatus.SCHEDULED:
            return
        r.status = RequestStatus.STARTING
        if r.kind is RequestKind.TRANSFER:
            start_progress(r, self.now)
        r.status = RequestStatus.RUNNING

    def _on_due(self, rid: str) -> None:
        s = self.scheduler
        r = s.requests[rid]
        if r.status is not RequestStatus.RUNNING:
            return
        if r.kind is RequestKind.RESERVATION:
            r.status = RequestStatus.FINISHED
            r.finish_time = self.now
            r.finish_status = "on_time"
            return
        rescheduler.handle_overrun(s, r)

    def _on_finish(self, rid: str) -> None:
        s = self.scheduler
        r = s.requests[rid]
        if r.status is not RequestStatus.RUNNING:
            return
        update_progress(r, self.now)
        r.progress.moved = Fraction(r.size)
        r.used_bandwidth = int(r.bandwidth * r.progress.factor)
        rescheduler.handle_early_finish(s, r, self.now)

    # -- event bookkeeping -------------------------------------------------

    def _sync(self) -> None:
        """(Re)issue START/DUE/FINISH events for requests whose plan changed."""
        s = self.scheduler
        for rid in sorted(s.requests):
            r = s.requests[rid]
            if r.parent is not None:
                continue
            sig = (r.status, r.start, r.end, r.bandwidth, s.coverage_end(r))
            if self._synced.get(rid) == sig:
                continue
            self._synced[rid] = sig
            self._epoch[rid] = self._epoch.get(rid, 0) + 1
            if r.status is RequestStatus.SCHEDULED:
                self._push(r.start, EventKind.START, rid)
            elif r.status is RequestStatus.RUNNING:
                if r.kind is RequestKind.TRANSFER:
                    update_progress(r, self.now)
                    self._push(recompute_finish(r, self.now), EventKind.FINISH, rid)
                self._push(s.coverage_end(r), EventKind.DUE, rid)


def run(topology: Topology, submissions: list[Submission], **options) -> SimulationReport:
    return Simulator(topology, submissions, **options).run()
