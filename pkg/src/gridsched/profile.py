"""Piecewise-constant available-bandwidth profiles over virtual time.

A profile is a contiguous list of intervals ``[begin, end)`` with constant
available bandwidth. The last interval always extends to infinity at the
profile's base capacity, since every reservation has a finite end. Times
are integer milliseconds, bandwidths integer kbps.

Link profiles only track availability. Path profiles additionally carry,
per interval, the ids of the requests reserved over it.
"""

from __future__ import annotations

import bisect
import enum
import math
from collections.abc import Iterable
from dataclasses import dataclass, field

from .errors import InsufficientBandwidth, InvalidCapacity, NoFit, UnknownRequest

INF = math.inf


class ProfileKind(enum.Enum):
    LINK = "link"
    PATH = "path"


@dataclass(frozen=True)
class Interval:
    begin: int
    end: float  # int, or INF for the tail
    available: int
    requests: frozenset = frozenset()


def duration_for(size_kbit: int, bw_kbps: int) -> int:
    """Milliseconds needed to move ``size_kbit`` at ``bw_kbps``, rounded up."""
    if bw_kbps <= 0:
        raise ValueError("bandwidth must be positive")
    return -(-size_kbit * 1000 // bw_kbps)


@dataclass
class BandwidthProfile:
    base_capacity: int
    kind: ProfileKind = ProfileKind.LINK
    intervals: list[Interval] = field(default_factory=list)
    # request id -> list of (begin, end, bw) segments currently held
    held: dict[str, list[tuple[int, int, int]]] = field(default_factory=dict)

    def __post_init__(self):
        if self.base_capacity <= 0:
            raise InvalidCapacity(f"capacity must be > 0, got {self.base_capacity}")
        if not self.intervals:
            self.intervals = [Interval(0, INF, self.base_capacity)]

    # -- queries ---------------------------------------------------------

    @property
    def tail_begin(self) -> int:
        return self.intervals[-1].begin

    def _index(self, t: int) -> int:
        """Index of the interval containing instant ``t``."""
        begins = [iv.begin for iv in self.intervals]
        return max(bisect.bisect_right(begins, t) - 1, 0)

    def available_at(self, t: int) -> int:
        return self.intervals[self._index(t)].available

    def covering(self, begin: int, end: float) -> list[Interval]:
        """Intervals intersecting ``[begin, end)``."""
        i = self._index(begin)
        out = []
        while i < len(self.intervals) and self.intervals[i].begin < end:
            out.append(self.intervals[i])
            i += 1
        return out

    def min_available(self, begin: int, end: float) -> int:
        if begin >= end:
            raise ValueError(f"empty window [{begin}, {end})")
        return min(iv.available for iv in self.covering(begin, end))

    def fits(self, start: int, duration: int, bw: int) -> bool:
        return start >= 0 and self.min_available(start, start + duration) >= bw

    def first_fit(self, earliest: int, duration: int, bw: int) -> int:
        """Smallest start >= ``earliest`` whose window has ``bw`` free throughout.

        Only ``earliest`` and interval boundaries after it can be minimal
        feasible starts of a step function, so only those are tried.
        """
        if duration <= 0 or bw <= 0:
            raise ValueError("duration and bandwidth must be positive")
        if bw > self.base_capacity:
            raise NoFit(f"{bw} kbps exceeds base capacity {self.base_capacity}")
        candidates = [earliest] + [iv.begin for iv in self.intervals if iv.begin > earliest]
        for start in candidates:
            if self.fits(start, duration, bw):
                return start
        raise AssertionError("unreachable: the tail interval is always at full capacity")

    def last_fit(self, duration: int, bw: int, not_before: int = 0) -> int:
        """Largest start >= ``not_before`` whose window ends by the tail.

        The tail interval never counts as a place to fit into. When nothing
        fits before it, the request goes at the start of the tail (or at
        ``not_before``, whichever is later).
        """
        if duration <= 0:
            raise ValueError("duration must be positive")
        if bw > self.base_capacity:
            raise NoFit(f"{bw} kbps exceeds base capacity {self.base_capacity}")
        tail = self.tail_begin
        # a maximal feasible window always ends on an interval boundary
        ends = [iv.begin for iv in self.intervals[1:]]
        for end in reversed(ends):
            start = end - duration
            if start < not_before:
                break
            if self.fits(start, duration, bw):
                return start
        return max(not_before, tail)

    # -- mutation --------------------------------------------------------

    def _split(self, t: int) -> None:
        """Ensure some interval begins exactly at ``t``."""
        i = self._index(t)
        iv = self.intervals[i]
        if iv.begin == t or t >= iv.end:
            return
        self.intervals[i:i + 1] = [
            Interval(iv.begin, t, iv.available, iv.requests),
            Interval(t, iv.end, iv.available, iv.requests),
        ]

    def _coalesce(self) -> None:
        merged = [self.intervals[0]]
        for iv in self.intervals[1:]:
            last = merged[-1]
            if last.available == iv.available and last.requests == iv.requests:
                merged[-1] = Interval(last.begin, iv.end, last.available, last.requests)
            else:
                merged.append(iv)
        self.intervals = merged

    def _apply(self, begin: int, end: int, delta: int, request_id: str, attach: bool) -> None:
        self._split(begin)
        self._split(end)
        for i, iv in enumerate(self.intervals):
            if iv.begin >= end:
                break
            if iv.begin >= begin:
                reqs = iv.requests
                if self.kind is ProfileKind.PATH:
                    reqs = reqs | {request_id} if attach else reqs - {request_id}
                self.intervals[i] = Interval(iv.begin, iv.end, iv.available + delta, reqs)
        self._coalesce()

    def reserve(self, begin: int, end: int, bw: int, request_id: str) -> None:
        if not begin < end:
            raise ValueError(f"empty window [{begin}, {end})")
        if end == INF:
            raise ValueError("reservations must have a finite end")
        if bw < 0:
            raise ValueError("bandwidth must be non-negative")
        free = self.min_available(begin, end)
        if free < bw:
            raise InsufficientBandwidth(
                f"{request_id}: needs {bw} kbps on [{begin}, {end}), only {free} free")
        self._apply(begin, end, -bw, request_id, attach=True)
        self.held.setdefault(request_id, []).append((begin, end, bw))

    def release(self, request_id: str) -> None:
        try:
            segments = self.held.pop(request_id)
        except KeyError:
            raise UnknownRequest(request_id) from None
        for begin, end, bw in segments:
            self._apply(begin, end, bw, request_id, attach=False)

    def copy(self) -> BandwidthProfile:
        return BandwidthProfile(self.base_capacity, self.kind, list(self.intervals),
                                {k: list(v) for k, v in self.held.items()})

    def rows(self) -> list[tuple[int, float, int, list[str]]]:
        return [(iv.begin, iv.end, iv.available, sorted(iv.requests)) for iv in self.intervals]


def new_profile(capacity_kbps: int, kind: ProfileKind = ProfileKind.LINK) -> BandwidthProfile:
    return BandwidthProfile(capacity_kbps, kind)


def path_availability(profiles: Iterable[BandwidthProfile]) -> BandwidthProfile:
    """Pointwise minimum of several profiles, as an ephemeral PATH profile."""
    profiles = list(profiles)
    if not profiles:
        raise ValueError("need at least one profile")
    cuts = sorted({iv.begin for p in profiles for iv in p.intervals})
    pieces = []
    for begin, end in zip(cuts, cuts[1:] + [INF]):
        pieces.append(Interval(begin, end, min(p.available_at(begin) for p in profiles)))
    out = BandwidthProfile(min(p.base_capacity for p in profiles), ProfileKind.PATH, pieces)
    out._coalesce()
    return out
