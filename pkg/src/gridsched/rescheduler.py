"""Three-step rescheduling cascade, plus early-finish and overrun handling.

When a request cannot be placed where it wants to go, lower-priority
requests are adjusted to make room, in escalating order:

1. shrink the bandwidth of running transfers,
2. shrink the bandwidth of scheduled transfers, keeping their start times,
3. move scheduled requests whose constraint allows a later start.

Each step runs first over the trigger's own user's requests and then over
everybody's. Every change goes through a :class:`Ledger` so that a failed
cascade is rolled back exactly.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .errors import CannotSchedule
from .model import (
    TOP_PRIORITY,
    ConstraintKind,
    Placement,
    Request,
    RequestKind,
    RequestStatus,
    not_after,
)
from .profile import INF, duration_for
from .progress import remaining_kbit, remaining_time, update_progress
from .topology import Path

if TYPE_CHECKING:
    from .scheduler import Scheduler

log = logging.getLogger(__name__)

OWN, ALL = "own", "all"
MOVABLE = frozenset({ConstraintKind.NONE, ConstraintKind.NOT_BEFORE})


@dataclass
class Change:
    key: str
    before: Request | None  # None marks a fresh hold with nothing to restore
    path: Path
    note: str
    booked: bool = True


class Ledger:
    """Reversible log of every state change made during one cascade."""

    def __init__(self, scheduler: Scheduler):
        self.scheduler = scheduler
        self.changes: list[Change] = []

    def mark(self) -> int:
        return len(self.changes)

    def touch(self, request: Request, note: str) -> None:
        """Record ``request`` as it is now, before it gets modified."""
        booked = self.scheduler.is_held(request.id, request.path)
        self.changes.append(Change(request.id, copy.deepcopy(request), request.path, note, booked))

    def hold(self, key: str, path: Path, segments, note: str = "trigger") -> None:
        self.scheduler.hold(key, path, segments)
        self.changes.append(Change(key, None, path, note))

    def undo_to(self, mark: int) -> None:
        s = self.scheduler
        while len(self.changes) > mark:
            change = self.changes.pop()
            if change.before is None:
                s.unhold(change.key, change.path)
                continue
            request = s.requests[change.key]
            s.unhold(request.id, request.path)
            request.__dict__.update(copy.deepcopy(change.before).__dict__)
            if change.booked:
                s.hold(request.id, request.path, request.segments)

    def victims(self) -> dict[str, Request]:
        """First recorded state of every request touched so far."""
        out: dict[str, Request] = {}
        for change in self.changes:
            if change.before is not None:
                out.setdefault(change.key, change.before)
        return out


@dataclass
class EligibilityFilter:
    statuses: frozenset
    max_priority: int  # exclusive
    requires_auto_bandwidth: bool = True
    allowed_constraints: frozenset | None = None

    def admits(self, r: Request) -> bool:
        return (r.status in self.statuses
                and r.priority < self.max_priority
                and (not self.requires_auto_bandwidth or r.auto_bandwidth)
                and (self.allowed_constraints is None or r.constraint.kind in self.allowed_constraints))


@dataclass
class _Cascade:
    scheduler: Scheduler
    trigger: Request
    path: Path
    needed: int
    key: str
    window: tuple[int, float]
    ledger: Ledger
    # step-two victims that stay unbooked while later steps run
    pending: list[Request] = field(default_factory=list)
    placement: Placement | None = None

    @property
    def now(self) -> int:
        return self.scheduler.now

    def candidates(self, flt: EligibilityFilter, scope: str) -> list[Request]:
        begin, end = self.window
        pending = {r.id for r in self.pending}
        out = []
        for r in self.scheduler.requests.values():
            if r.id == self.trigger.id or r.id == self.trigger.parent or r.id in pending:
                continue
            if not flt.admits(r) or r.path is None or not r.path.shares_link(self.path):
                continue
            if scope == OWN and r.user != self.trigger.user:
                continue
            if not (r.start < end and r.end > begin):
                continue
            out.append(r)
        return out

    def skip_scope(self, found: list[Request], scope: str) -> bool:
        # the all-users pass only matters if it reaches someone new
        return scope == ALL and all(r.user == self.trigger.user for r in found)

    def reduced(self, victim: Request) -> int | None:
        """Victim's bandwidth after one application of the reduction rule."""
        bw = min(self.needed, victim.bandwidth // 2)
        if bw < self.scheduler.floor_for(victim.path):
            return None
        return bw

    def retry(self) -> Placement | None:
        try:
            placement = self.scheduler.place(self.trigger, self.path)
        except CannotSchedule:
            return None
        self.ledger.hold(self.key, self.path, placement.segments)
        self.placement = placement
        return placement

    # -- step 1 ----------------------------------------------------------

    def shrink_running(self, victim: Request, bw: int) -> None:
        s, now = self.scheduler, self.now
        self.ledger.touch(victim, "shrink-running")
        update_progress(victim, now)
        old_end = victim.end
        new_end = now + remaining_time(victim, bw, factor=1)
        past = [(b, min(e, now), x) for b, e, x in victim.segments if b < now]
        s.unhold(victim.id, victim.path)
        if not s.can_hold(victim.path, [(now, new_end, bw)]):
            # the longer tail collides with later bookings; overrun handling takes over at old_end
            new_end = old_end
        victim.bandwidth = bw
        victim.duration = new_end - victim.start
        victim.bw_modification_count += 1
        victim.bandwidth_history.append((now, bw))
        s.rebook(victim, past + [(now, new_end, bw)])

    def step1(self, scope: str) -> Placement | None:
        flt = EligibilityFilter(frozenset({RequestStatus.RUNNING, RequestStatus.STARTING}),
                                self.trigger.priority)
        found = [r for r in self.candidates(flt, scope)
                 if not r.extensions and r.end > self.now and remaining_kbit(r) > 0]
        if not found or self.skip_scope(found, scope):
            return None
        while True:
            # one reduction per victim per pass; re-sort between passes
            found.sort(key=lambda r: (r.priority, r.bw_modification_count, r.bandwidth, r.id))
            progressed = False
            for victim in found:
                bw = self.reduced(victim)
                if bw is None:
                    continue
                self.shrink_running(victim, bw)
                progressed = True
                if self.retry():
                    return self.placement
            if not progressed:
                return None

    # -- step 2 ----------------------------------------------------------

    def _reinsert(self, victim: Request, reduce_first: bool) -> bool:
        """Book a removed victim back at its original start, shrinking as needed."""
        s = self.scheduler
        self.ledger.touch(victim, "reinsert")
        if not reduce_first and s.can_hold(victim.path, [(victim.start, victim.end, victim.bandwidth)]):
            s.rebook(victim, [(victim.start, victim.end, victim.bandwidth)])
            return True
        while True:
            bw = self.reduced(victim)
            if bw is None:
                return False
            victim.bandwidth = bw
            victim.duration = duration_for(victim.size, bw)
            victim.bw_modification_count += 1
            victim.bandwidth_history.append((self.now, bw))
            if s.can_hold(victim.path, [(victim.start, victim.end, bw)]):
                s.rebook(victim, [(victim.start, victim.end, bw)])
                return True

    def reinsert_greedy(self, victims: list[Request]) -> bool:
        """Two-ended greedy: shrink from the front, try unmodified from the back."""
        order = sorted(victims, key=lambda r: (r.priority, r.bw_modification_count, -r.bandwidth, r.id))
        i, j, front = 0, len(order) - 1, True
        while i <= j:
            if front:
                victim, i = order[i], i + 1
            else:
                victim, j = order[j], j - 1
            if not self._reinsert(victim, reduce_first=front):
                return False
            front = not front
        return True

    def step2(self, scope: str) -> Placement | None:
        flt = EligibilityFilter(frozenset({RequestStatus.SCHEDULED}), self.trigger.priority)
        found = self.candidates(flt, scope)
        if not found or self.skip_scope(found, scope):
            return None
        mark, pending = self.ledger.mark(), list(self.pending)
        for victim in found:
            self.ledger.touch(victim, "remove")
            self.scheduler.unhold(victim.id, victim.path)
            self.pending.append(victim)
        if not self.retry():
            return None  # victims stay out until the cascade is over
        if self.reinsert_greedy(self.pending):
            self.pending = []
            return self.placement
        self.ledger.undo_to(mark)
        self.pending = pending
        return None

    # -- step 3 ----------------------------------------------------------

    def step3(self, scope: str) -> Placement | None:
        s = self.scheduler
        flt = EligibilityFilter(frozenset({RequestStatus.SCHEDULED}), self.trigger.priority,
                                requires_auto_bandwidth=False, allowed_constraints=MOVABLE)
        found = self.candidates(flt, scope)
        if not found or self.skip_scope(found, scope):
            return None
        found.sort(key=lambda r: (r.priority, r.reschedule_count, -r.bandwidth, r.id))
        mark, pending = self.ledger.mark(), list(self.pending)
        removed = []
        for mover in found:
            self.ledger.touch(mover, "remove")
            s.unhold(mover.id, mover.path)
            removed.append(mover)
            if self.retry():
                break
        else:
            self.ledger.undo_to(mark)
            return None
        if self.pending and not self.reinsert_greedy(self.pending):
            self.ledger.undo_to(mark)
            self.pending = pending
            return None
        self.pending = []
        for mover in removed:
            self.ledger.touch(mover, "move")
            p = s.schedule_fixed_bw(mover, mover.path, mover.bandwidth)
            if p.start != mover.start:
                mover.reschedule_count += 1
            mover.start, mover.duration = p.start, p.duration
            s.rebook(mover, p.segments)
        return self.placement


def conflict_window(scheduler: Scheduler, request: Request, needed: int) -> tuple[int, float]:
    """Time span a victim must overlap to be worth touching for ``request``."""
    now = scheduler.now
    if request.kind is RequestKind.RESERVATION:
        return request.requested_start, request.requested_start + request.duration
    if request.constraint.kind is ConstraintKind.NOT_AFTER:
        return now, request.constraint.bound + duration_for(request.size, needed)
    return now, INF


def try_reschedule(scheduler: Scheduler, request: Request, path: Path,
                   needed: int | None, key: str) -> Placement | None:
    """Run the cascade for ``request`` on ``path``.

    On success the trigger's placement is held under ``key`` and returned.
    On failure the scheduler is left exactly as it was and ``None`` comes back.
    """
    needed = needed or request.user_bandwidth or path.bottleneck
    window = conflict_window(scheduler, request, needed)
    record = {"time": scheduler.now, "trigger": request.id, "trigger_priority": request.priority,
              "path": path.key, "needed_kbps": needed}
    if window[0] < scheduler.now:
        # the intended position is already in the past; nothing can make room
        scheduler.cascades.append({**record, "step": None, "scope": None,
                                   "outcome": "failure", "victims": []})
        return None
    ledger = Ledger(scheduler)
    cascade = _Cascade(scheduler, request, path, needed, key, window, ledger)
    steps = ((1, cascade.step1), (2, cascade.step2), (3, cascade.step3))
    for number, step in steps:
        for scope in (OWN, ALL):
            mark = ledger.mark()
            placement = step(scope)
            if placement is not None:
                scheduler.cascades.append({**record, "step": number, "scope": scope,
                                           "outcome": "success",
                                           "victims": _victim_rows(scheduler, ledger)})
                log.info("cascade for %s succeeded at step %d (%s)", request.id, number, scope)
                return placement
            if number == 1:
                ledger.undo_to(mark)
    ledger.undo_to(0)
    scheduler.cascades.append({**record, "step": 3, "scope": ALL, "outcome": "failure",
                               "victims": []})
    return None


def _victim_rows(scheduler: Scheduler, ledger: Ledger) -> list[dict]:
    rows = []
    for rid, before in ledger.victims().items():
        after = scheduler.requests[rid]
        rows.append({"id": rid, "user": after.user, "priority": after.priority,
                     "before": {"bandwidth": before.bandwidth, "start": before.start},
                     "after": {"bandwidth": after.bandwidth, "start": after.start}})
    return rows


# -- dynamic rescheduling --------------------------------------------------

def _truncate(scheduler: Scheduler, request: Request, t: int) -> None:
    request.duration = min(request.end, t) - request.start
    scheduler.rebook(request, [(b, min(e, t), bw) for b, e, bw in request.segments if b < t])


def handle_early_finish(scheduler: Scheduler, request: Request, actual_finish: int) -> None:
    """Mark a transfer finished and free whatever it had booked past ``actual_finish``."""
    due = scheduler.coverage_end(request)
    for ext_id in request.extensions:
        ext = scheduler.requests[ext_id]
        if ext.status is RequestStatus.RUNNING:
            ext.finish_status = "released" if actual_finish < ext.end else "on_time"
            _truncate(scheduler, ext, actual_finish)
            ext.status = RequestStatus.FINISHED
            ext.finish_time = actual_finish
    if request.end > actual_finish:
        _truncate(scheduler, request, actual_finish)
    request.status = RequestStatus.FINISHED
    request.finish_time = actual_finish
    if request.extensions:
        request.finish_status = "overrun"
    elif actual_finish < due:
        request.finish_status = "early"
    else:
        request.finish_status = "on_time"


def _degraded_extension(scheduler: Scheduler, request: Request, ext: Request,
                        key: str) -> Placement | None:
    """Halve the extension's rate until it fits right now; auto-bandwidth transfers only."""
    bw, floor = request.bandwidth // 2, scheduler.floor_for(request.path)
    while bw >= floor:
        length = max(scheduler.min_extension, remaining_time(request, bw))
        placement = Placement(request.path, scheduler.now, length, bw)
        if scheduler.can_hold(request.path, placement.segments):
            ext.user_bandwidth, ext.duration = bw, length
            scheduler.hold(key, request.path, placement.segments)
            return placement
        bw //= 2
    return None


def handle_overrun(scheduler: Scheduler, request: Request) -> Request | None:
    """Keep a late transfer alive with a top-priority reservation starting now.

    Returns the extension request, or ``None`` when no room could be made,
    in which case the transfer is put in ERROR.
    """
    now = scheduler.now
    for ext_id in request.extensions:
        ext = scheduler.requests[ext_id]
        if ext.status is RequestStatus.RUNNING:
            ext.status = RequestStatus.FINISHED
            ext.finish_time = ext.end
            ext.finish_status = "elapsed"
    update_progress(request, now)
    length = max(scheduler.min_extension, remaining_time(request))
    ext = Request(
        id=f"{request.id}+ext{len(request.extensions) + 1}", user=request.user,
        kind=RequestKind.RESERVATION, source=request.source, dest=request.dest,
        priority=TOP_PRIORITY, constraint=not_after(now), user_bandwidth=request.bandwidth,
        submit_time=now, requested_start=now, duration=length, parent=request.id,
    )
    scheduler.requests[ext.id] = ext
    key = f"{ext.id}#hold"
    try:
        placement = scheduler.reserve_bandwidth(ext, request.path)
        scheduler.hold(key, request.path, placement.segments)
    except CannotSchedule as exc:
        placement = try_reschedule(scheduler, ext, request.path, exc.needed_bandwidth, key)
    if placement is None and request.auto_bandwidth:
        placement = _degraded_extension(scheduler, request, ext, key)
    if placement is None:
        del scheduler.requests[ext.id]
        request.status = RequestStatus.ERROR
        request.finish_status = "extension_unplaceable"
        request.finish_time = now
        log.warning("overrun of %s could not be covered at %d", request.id, now)
        return None
    scheduler.unhold(key, request.path)
    if placement.bandwidth != request.bandwidth:
        request.bandwidth = placement.bandwidth
        request.bw_modification_count += 1
        request.bandwidth_history.append((now, placement.bandwidth))
    ext.path = request.path
    ext.bandwidth = placement.bandwidth
    ext.start, ext.duration = placement.start, placement.duration
    ext.status = RequestStatus.RUNNING
    ext.bandwidth_history.append((now, ext.bandwidth))
    scheduler.rebook(ext, placement.segments)
    request.extensions.append(ext.id)
    return ext
