"""Bandwidth-reserving file-transfer scheduler with a discrete-event simulator."""

from __future__ import annotations

from .errors import (
                     CannotSchedule,
                     ExpiredOffer,
                     GridSchedError,
                     InsufficientBandwidth,
                     InvalidCapacity,
                     InvariantViolation,
                     NoFit,
                     NoPath,
                     ParseError,
                     ScenarioInvalid,
                     SemanticError,
                     UnknownNode,
                     UnknownOffer,
                     UnknownRequest,
)
from .model import (
                     ASAP,
                     NO_CONSTRAINT,
                     TOP_PRIORITY,
                     ConstraintKind,
                     Offer,
                     Placement,
                     Request,
                     RequestKind,
                     RequestSpec,
                     RequestStatus,
                     TimeConstraint,
                     not_after,
                     not_before,
)
from .profile import (
                     INF,
                     BandwidthProfile,
                     Interval,
                     ProfileKind,
                     new_profile,
                     path_availability,
)
from .scenario import Scenario, Settings
from .scheduler import Scheduler
from .sim import AcceptPolicy, SimEvent, SimulationReport, Simulator, Submission, run
from .topology import Link, Path, Topology

__version__ = "0.1.0"

__all__ = [
    "ASAP", "INF", "NO_CONSTRAINT", "TOP_PRIORITY",
    "AcceptPolicy", "BandwidthProfile", "CannotSchedule", "ConstraintKind", "ExpiredOffer",
    "GridSchedError", "InsufficientBandwidth", "Interval", "InvalidCapacity", "InvariantViolation",
    "Link", "NoFit", "NoPath", "Offer", "ParseError", "Path", "Placement", "ProfileKind", "Request",
    "RequestKind", "RequestSpec", "RequestStatus", "Scenario", "ScenarioInvalid", "Scheduler",
    "SemanticError", "Settings", "SimEvent", "SimulationReport", "Simulator", "Submission",
    "TimeConstraint", "Topology", "UnknownNode", "UnknownOffer", "UnknownRequest",
    "new_profile", "not_after", "not_before", "path_availability", "run",
]
