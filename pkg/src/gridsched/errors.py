"""Exception hierarchy shared by every gridsched module."""

from __future__ import annotations


class GridSchedError(Exception):
    """Base class for all scheduler errors."""


class DuplicateNode(GridSchedError):
    pass


class DuplicateLink(GridSchedError):
    pass


class UnknownNode(GridSchedError):
    pass


class InvalidCapacity(GridSchedError, ValueError):
    pass


class InsufficientBandwidth(GridSchedError):
    """A reservation does not fit in a profile over its window."""


class UnknownRequest(GridSchedError, KeyError):
    pass


class NoFit(GridSchedError):
    """The requested bandwidth exceeds the profile's base capacity."""


class NoPath(GridSchedError):
    pass


class CannotSchedule(GridSchedError):
    """Placement failed under the request's constraint.

    ``needed_bandwidth`` is the bandwidth the request was last tried at;
    the rescheduling cascade uses it in the reduction rule.
    """

    def __init__(self, message: str = "", needed_bandwidth: int | None = None):
        super().__init__(message)
        self.needed_bandwidth = needed_bandwidth


class UnknownOffer(GridSchedError, KeyError):
    pass


class ExpiredOffer(GridSchedError):
    pass


class InvariantViolation(GridSchedError):
    """Raised when a runtime consistency check fails."""


class ScenarioInvalid(GridSchedError):
    """Aggregated scenario problems; ``errors`` holds one message per issue."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class ParseError(ScenarioInvalid):
    pass


class SemanticError(ScenarioInvalid):
    pass
