"""Central transfer scheduler: placement policies, offers and bookkeeping.

One :class:`Scheduler` owns every link's bandwidth profile and every
request. Path availability is always recomputed from the link profiles, so
links shared between paths can never be double-booked.
"""

from __future__ import annotations

import logging
from itertools import count

from . import rescheduler
from .errors import (
    CannotSchedule,
    ExpiredOffer,
    InsufficientBandwidth,
    InvariantViolation,
    NoPath,
    UnknownOffer,
)
from .model import (
    ConstraintKind,
    Offer,
    Placement,
    Request,
    RequestKind,
    RequestSpec,
    RequestStatus,
    not_after,
)
from .profile import INF, BandwidthProfile, duration_for, new_profile, path_availability
from .topology import DEFAULT_MAX_PATHS, Path, Topology

log = logging.getLogger(__name__)

DEFAULT_BANDWIDTH_FLOOR = 1000  # kbps
DEFAULT_MIN_EXTENSION = 1000  # ms


class Scheduler:
    """Places requests on paths and keeps link profiles consistent.

    ``now`` is the virtual time used by ASAP/NONE placements; the simulator
    advances it before every operation.
    """

    def __init__(self, topology: Topology, *, max_paths: int = DEFAULT_MAX_PATHS,
                 bandwidth_floor: int = DEFAULT_BANDWIDTH_FLOOR, offer_expiry: int = 0,
                 min_extension: int = DEFAULT_MIN_EXTENSION):
        self.topology = topology
        self.max_paths = max_paths
        self.bandwidth_floor = bandwidth_floor
        self.offer_expiry = offer_expiry
        self.min_extension = min_extension
        self.links: dict[str, BandwidthProfile] = {
            lid: new_profile(link.capacity) for lid, link in topology.links.items()}
        self.requests: dict[str, Request] = {}
        self.offers: dict[str, Offer] = {}
        self.discarded: dict[str, Request] = {}
        self.cascades: list[dict] = []
        self.now = 0
        self._expired: set[str] = set()
        self._offer_seq = count(1)

    # -- link-level bookkeeping ------------------------------------------

    def floor_for(self, path: Path) -> int:
        return max(self.bandwidth_floor, path.bottleneck // 64)

    def availability(self, path: Path) -> BandwidthProfile:
        return path_availability(self.links[lid] for lid in path.link_ids)

    def can_hold(self, path: Path, segments) -> bool:
        avail = self.availability(path)
        return all(avail.min_available(b, e) >= bw for b, e, bw in segments if b < e)

    def hold(self, key: str, path: Path, segments) -> None:
        """Reserve ``segments`` under ``key`` on every link of ``path``, atomically."""
        segments = [s for s in segments if s[0] < s[1]]
        if not self.can_hold(path, segments):
            raise InsufficientBandwidth(f"{key}: segments {segments} do not fit on {path}")
        for lid in path.link_ids:
            for b, e, bw in segments:
                self.links[lid].reserve(b, e, bw, key)

    def unhold(self, key: str, path: Path | None) -> None:
        if path is None:
            return
        for lid in path.link_ids:
            if key in self.links[lid].held:
                self.links[lid].release(key)

    def is_held(self, key: str, path: Path | None) -> bool:
        return path is not None and key in self.links[path.link_ids[0]].held

    def rebook(self, request: Request, segments) -> None:
        """Replace a request's reservation with ``segments``."""
        self.unhold(request.id, request.path)
        request.segments = [s for s in segments if s[0] < s[1]]
        self.hold(request.id, request.path, request.segments)

    def coverage_end(self, request: Request) -> int:
        if request.extensions:
            return self.requests[request.extensions[-1]].end
        return request.end

    # -- placement policies ----------------------------------------------

    def schedule_fixed_bw(self, request: Request, path: Path, bw: int | None = None) -> Placement:
        """Place ``request`` at bandwidth ``bw`` under its time constraint."""
        bw = request.user_bandwidth if bw is None else bw
        if bw > path.bottleneck:
            raise CannotSchedule(f"{request.id}: {bw} kbps exceeds bottleneck of {path}", bw)
        if request.kind is RequestKind.TRANSFER:
            duration = duration_for(request.size, bw)
        else:
            duration = request.duration
        avail = self.availability(path)
        now = self.now
        c = request.constraint
        if c.kind is ConstraintKind.ASAP:
            start = avail.first_fit(now, duration, bw)
        elif c.kind is ConstraintKind.NOT_AFTER:
            if c.bound >= now and avail.fits(c.bound, duration, bw):
                start = c.bound
            else:
                start = avail.first_fit(now, duration, bw)
                if start > c.bound:
                    raise CannotSchedule(
                        f"{request.id}: earliest fit {start} is after {c.bound}", bw)
        elif c.kind is ConstraintKind.NOT_BEFORE:
            t = max(c.bound, now)
            start = t if avail.fits(t, duration, bw) else avail.last_fit(duration, bw, t)
        else:
            start = avail.last_fit(duration, bw, now)
        return Placement(path, start, duration, bw)

    def schedule_auto_bw(self, request: Request, path: Path) -> Placement:
        """Pick a bandwidth for a transfer by repeated halving.

        Starts at the path's full bottleneck capacity and keeps halving while
        each halved placement ends strictly earlier than the previous one.
        Until some trial is feasible the halving simply continues. If none
        is, the error carries the first halved rate as the bandwidth the
        request needs, which is what the cascade then tries to free.
        """
        floor = self.floor_for(path)
        trace: list[tuple[int, int | None]] = []

        def trial(bw):
            try:
                p = self.schedule_fixed_bw(request, path, bw)
            except CannotSchedule:
                trace.append((bw, None))
                return None
            trace.append((bw, p.end))
            return p

        bw = path.bottleneck
        best = trial(bw)
        while bw // 2 >= floor:
            cand = trial(bw // 2)
            bw //= 2
            if best is None:
                best = cand
                continue
            if cand is None or not best.end > cand.end:
                break
            best = cand
        if best is None:
            needed = trace[1][0] if len(trace) > 1 else trace[0][0]
            raise CannotSchedule(f"{request.id}: no feasible bandwidth on {path}", needed)
        best.trace = trace
        return best

    def reserve_bandwidth(self, request: Request, path: Path, *,
                          allow_alternative: bool = False) -> Placement:
        """Place a reservation exactly at its requested window.

        With ``allow_alternative`` a failed exact placement falls back to the
        earliest window that fits, flagged non-conforming.
        """
        bw = request.user_bandwidth
        if bw > path.bottleneck:
            raise CannotSchedule(f"{request.id}: {bw} kbps exceeds bottleneck of {path}", bw)
        start, duration = request.requested_start, request.duration
        avail = self.availability(path)
        if start >= self.now and avail.fits(start, duration, bw):
            return Placement(path, start, duration, bw)
        if not allow_alternative:
            raise CannotSchedule(f"{request.id}: window [{start}, {start + duration}) is full", bw)
        alt = avail.first_fit(self.now, duration, bw)
        return Placement(path, alt, duration, bw, conforming=False)

    def place(self, request: Request, path: Path) -> Placement:
        """Conforming placement of ``request`` on ``path`` without touching state."""
        if request.kind is RequestKind.RESERVATION:
            return self.reserve_bandwidth(request, path)
        if request.auto_bandwidth:
            return self.schedule_auto_bw(request, path)
        return self.schedule_fixed_bw(request, path)

    # -- offers ----------------------------------------------------------

    def _new_offer(self, request: Request, placement: Placement, key: str | None = None,
                   held: bool = False) -> Offer:
        key = key or f"{request.id}#o{next(self._offer_seq)}"
        if not held:
            self.hold(key, placement.path, placement.segments)
        offer = Offer(key, request.id, placement, self.now + self.offer_expiry)
        self.offers[key] = offer
        return offer

    def offers_for(self, request_id: str) -> list[Offer]:
        return [o for o in self.offers.values() if o.request_id == request_id]

    def submit(self, spec: RequestSpec) -> list[Offer]:
        """Compute offers for a new request, invoking the cascade if needed.

        Offers hold their capacity until accepted, declined or expired. They
        come back conforming first, then by earliest end, then by highest
        bandwidth.
        """
        if spec.id in self.requests or spec.id in self.discarded:
            raise ValueError(f"duplicate request id {spec.id!r}")
        request = Request.from_spec(spec, self.now)
        paths = self.topology.enumerate_paths(spec.source, spec.dest, self.max_paths)
        if not paths:
            self._reject(request, "no_path")
            raise NoPath(f"{spec.id}: no path from {spec.source} to {spec.dest}")
        if request.user_bandwidth is not None:
            paths = [p for p in paths if request.user_bandwidth <= p.bottleneck]
            if not paths:
                self._reject(request, "cannot_schedule")
                raise CannotSchedule(f"{spec.id}: bandwidth exceeds every path's bottleneck",
                                     request.user_bandwidth)
        self.requests[request.id] = request

        offers: list[Offer] = []
        failed: list[tuple[Path, CannotSchedule]] = []
        for path in paths:
            try:
                offers.append(self._new_offer(request, self.place(request, path)))
            except CannotSchedule as exc:
                failed.append((path, exc))

        if not offers:
            for path, exc in failed:
                key = f"{request.id}#o{next(self._offer_seq)}"
                placement = rescheduler.try_reschedule(self, request, path, exc.needed_bandwidth, key)
                if placement is not None:
                    offers.append(self._new_offer(request, placement, key, held=True))
                    break

        if not offers and request.kind is RequestKind.RESERVATION:
            for path in paths:
                placement = self.reserve_bandwidth(request, path, allow_alternative=True)
                offers.append(self._new_offer(request, placement))

        if not offers:
            del self.requests[request.id]
            self._reject(request, "cannot_schedule")
            raise CannotSchedule(f"{spec.id}: no placement on any path even after rescheduling")

        offers.sort(key=lambda o: (not o.conforming, o.end, -o.bandwidth))
        log.debug("submit %s -> %s", request.id, [(o.offer_id, o.start, o.bandwidth) for o in offers])
        return offers

    def _reject(self, request: Request, reason: str) -> None:
        request.status = RequestStatus.ERROR
        request.finish_status = reason
        self.discarded[request.id] = request

    def _drop_offer(self, offer: Offer) -> None:
        self.unhold(offer.offer_id, offer.path)
        del self.offers[offer.offer_id]

    def accept(self, offer_id: str) -> Request:
        if offer_id in self._expired:
            raise ExpiredOffer(offer_id)
        try:
            offer = self.offers[offer_id]
        except KeyError:
            raise UnknownOffer(offer_id) from None
        if offer.expires_at < self.now:
            self.expire_offers()
            raise ExpiredOffer(offer_id)
        request = self.requests[offer.request_id]
        for sibling in self.offers_for(request.id):
            self._drop_offer(sibling)
        p = offer.placement
        request.path = p.path
        request.bandwidth = p.bandwidth
        request.start = p.start
        request.duration = p.duration
        request.conforming = p.conforming
        if not p.conforming:
            # the user agreed to the alternative start
            request.constraint = not_after(p.start)
        request.status = RequestStatus.SCHEDULED
        request.bandwidth_history.append((self.now, p.bandwidth))
        self.rebook(request, p.segments)
        return request

    def decline(self, request_id: str, reason: str = "declined") -> None:
        for offer in self.offers_for(request_id):
            self._drop_offer(offer)
        request = self.requests.pop(request_id)
        request.finish_status = reason
        self.discarded[request_id] = request

    def expire_offers(self) -> None:
        stale = [o for o in self.offers.values() if o.expires_at < self.now]
        for offer in stale:
            self._drop_offer(offer)
            self._expired.add(offer.offer_id)
        for rid in {o.request_id for o in stale}:
            if not self.offers_for(rid) and self.requests[rid].status is RequestStatus.OFFERED:
                self.decline(rid, "expired")

    # -- inspection ------------------------------------------------------

    def path_profile(self, path: Path) -> BandwidthProfile:
        """Path availability annotated with the requests booked on exactly ``path``."""
        prof = self.availability(path)
        for r in self.requests.values():
            if r.path == path:
                for b, e, _ in r.segments:
                    prof.reserve(b, e, 0, r.id)
        for o in self.offers.values():
            if o.path == path:
                prof.reserve(o.start, o.end, 0, o.offer_id)
        return prof

    def paths_in_use(self) -> list[Path]:
        seen = {}
        for r in self.requests.values():
            if r.path is not None:
                seen.setdefault(r.path.key, r.path)
        for o in self.offers.values():
            seen.setdefault(o.path.key, o.path)
        return [seen[k] for k in sorted(seen)]

    def verify(self) -> None:
        """Cross-check link profiles against request and offer bookings."""
        expected: dict[str, dict[str, list]] = {lid: {} for lid in self.links}
        for r in list(self.requests.values()):
            if r.path is not None and r.segments:
                for lid in r.path.link_ids:
                    expected[lid][r.id] = sorted(r.segments)
        for o in self.offers.values():
            for lid in o.path.link_ids:
                expected[lid][o.offer_id] = sorted(o.placement.segments)
        for lid, prof in self.links.items():
            actual = {k: sorted(v) for k, v in prof.held.items()}
            if actual != expected[lid]:
                raise InvariantViolation(f"link {lid}: bookings {actual} != requests {expected[lid]}")
            for iv in prof.intervals:
                if not 0 <= iv.available <= prof.base_capacity:
                    raise InvariantViolation(f"link {lid}: availability {iv.available} at {iv.begin}")
            if prof.intervals[-1].end != INF or prof.intervals[-1].available != prof.base_capacity:
                raise InvariantViolation(f"link {lid}: tail interval is not at full capacity")
