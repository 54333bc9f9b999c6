"""Request, offer and constraint types shared by the scheduler and simulator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

from .topology import Path

# Overrun extensions outrank every user request.
TOP_PRIORITY = 2**63 - 1


class RequestKind(enum.Enum):
    TRANSFER = "transfer"
    RESERVATION = "reservation"


class ConstraintKind(enum.Enum):
    NONE = "NONE"
    ASAP = "ASAP"
    NOT_AFTER = "NOT_AFTER"
    NOT_BEFORE = "NOT_BEFORE"

    @property
    def bounded(self) -> bool:
        return self in (ConstraintKind.NOT_AFTER, ConstraintKind.NOT_BEFORE)


@dataclass(frozen=True)
class TimeConstraint:
    kind: ConstraintKind = ConstraintKind.NONE
    bound: int | None = None

    def __post_init__(self):
        if self.kind.bounded != (self.bound is not None):
            raise ValueError(f"{self.kind.value}: bound must be given iff the constraint is bounded")

    def satisfied_by(self, start: int) -> bool:
        if self.kind is ConstraintKind.NOT_AFTER:
            return start <= self.bound
        if self.kind is ConstraintKind.NOT_BEFORE:
            return start >= self.bound
        return True

    def __str__(self):
        return self.kind.value if self.bound is None else f"{self.kind.value}({self.bound})"


NO_CONSTRAINT = TimeConstraint()
ASAP = TimeConstraint(ConstraintKind.ASAP)


def not_after(t: int) -> TimeConstraint:
    return TimeConstraint(ConstraintKind.NOT_AFTER, t)


def not_before(t: int) -> TimeConstraint:
    return TimeConstraint(ConstraintKind.NOT_BEFORE, t)


class RequestStatus(enum.Enum):
    OFFERED = "OFFERED"
    SCHEDULED = "SCHEDULED"
    STARTING = "STARTING"
    RUNNING = "RUNNING"
    FINISHED = "FINISHED"
    ERROR = "ERROR"


@dataclass(frozen=True)
class RequestSpec:
    """What a user submits. Times in ms, sizes in kilobits, bandwidth in kbps."""

    id: str
    user: str
    kind: RequestKind
    source: str
    dest: str
    priority: int = 0
    size: int | None = None
    bandwidth: int | None = None
    start: int | None = None
    duration: int | None = None
    constraint: TimeConstraint = NO_CONSTRAINT
    throughput_factor: Fraction = Fraction(1)

    def __post_init__(self):
        if self.source == self.dest:
            raise ValueError(f"{self.id}: source and dest must differ")
        if self.priority < 0:
            raise ValueError(f"{self.id}: priority must be non-negative")
        if self.kind is RequestKind.TRANSFER:
            if self.size is None or self.size <= 0:
                raise ValueError(f"{self.id}: a transfer needs a positive size")
        else:
            if self.bandwidth is None or self.start is None or self.duration is None:
                raise ValueError(f"{self.id}: a reservation needs bandwidth, start and duration")
            if self.duration <= 0:
                raise ValueError(f"{self.id}: duration must be positive")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError(f"{self.id}: bandwidth must be positive")
        if not 0 < self.throughput_factor <= 1:
            raise ValueError(f"{self.id}: throughput factor must lie in (0, 1]")


@dataclass
class TransferProgress:
    """Kilobits moved so far, kept as an exact fraction to avoid drift."""

    moved: Fraction = Fraction(0)
    last_update: int = 0
    factor: Fraction = Fraction(1)

    @property
    def bytes_moved(self) -> int:
        return int(self.moved)


@dataclass
class Request:
    id: str
    user: str
    kind: RequestKind
    source: str
    dest: str
    priority: int
    constraint: TimeConstraint
    size: int | None = None
    user_bandwidth: int | None = None
    throughput_factor: Fraction = Fraction(1)
    submit_time: int = 0
    requested_start: int | None = None
    status: RequestStatus = RequestStatus.OFFERED
    path: Path | None = None
    bandwidth: int = 0
    start: int = 0
    duration: int = 0
    segments: list[tuple[int, int, int]] = field(default_factory=list)
    bw_modification_count: int = 0
    reschedule_count: int = 0
    bandwidth_history: list[tuple[int, int]] = field(default_factory=list)
    progress: TransferProgress | None = None
    used_bandwidth: int = 0
    finish_status: str = ""
    conforming: bool = True
    parent: str | None = None
    extensions: list[str] = field(default_factory=list)
    finish_time: int | None = None

    @classmethod
    def from_spec(cls, spec: RequestSpec, now: int) -> Request:
        constraint = spec.constraint
        if spec.kind is RequestKind.RESERVATION:
            # a reservation behaves like a NOT_AFTER placement at its start
            constraint = TimeConstraint(ConstraintKind.NOT_AFTER, spec.start)
        return cls(
            id=spec.id, user=spec.user, kind=spec.kind, source=spec.source,
            dest=spec.dest, priority=spec.priority, constraint=constraint,
            size=spec.size, user_bandwidth=spec.bandwidth,
            throughput_factor=spec.throughput_factor, submit_time=now,
            requested_start=spec.start, duration=spec.duration or 0,
        )

    @property
    def auto_bandwidth(self) -> bool:
        return self.user_bandwidth is None

    @property
    def end(self) -> int:
        return self.start + self.duration

    @property
    def active(self) -> bool:
        return self.status in (RequestStatus.SCHEDULED, RequestStatus.STARTING,
                               RequestStatus.RUNNING)

    def __str__(self):
        return (f"{self.id}[{self.status.value} p{self.priority} {self.bandwidth}kbps "
                f"@{self.start}+{self.duration}]")


@dataclass
class Placement:
    path: Path
    start: int
    duration: int
    bandwidth: int
    conforming: bool = True
    # auto-bandwidth search: (bandwidth tried, end time or None when infeasible)
    trace: list[tuple[int, int | None]] = field(default_factory=list)

    @property
    def end(self) -> int:
        return self.start + self.duration

    @property
    def segments(self) -> list[tuple[int, int, int]]:
        return [(self.start, self.end, self.bandwidth)]


@dataclass
class Offer:
    offer_id: str
    request_id: str
    placement: Placement
    expires_at: int

    @property
    def path(self) -> Path:
        return self.placement.path

    @property
    def start(self) -> int:
        return self.placement.start

    @property
    def duration(self) -> int:
        return self.placement.duration

    @property
    def bandwidth(self) -> int:
        return self.placement.bandwidth

    @property
    def end(self) -> int:
        return self.placement.end

    @property
    def conforming(self) -> bool:
        return self.placement.conforming
