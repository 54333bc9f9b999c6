"""Small builders shared by the test modules."""

from __future__ import annotations

from fractions import Fraction

from gridsched.model import RequestKind, RequestSpec, TimeConstraint
from gridsched.topology import Topology

# criterion number -> (title, outcome); filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def make_testbed() -> Topology:
    """Three-node test bed: gs -> tschedUPB2 at 100 Mbps, tschedUPB1 -> tschedUPB2 at 50 Mbps."""
    topo = Topology()
    for name in ("gs", "tschedUPB1", "tschedUPB2"):
        topo.add_node(name)
    topo.add_link("link1", "tschedUPB1", "tschedUPB2", 50000)
    topo.add_link("link2", "gs", "tschedUPB2", 100000)
    return topo


def single_link(capacity: int = 50000) -> Topology:
    topo = Topology()
    topo.add_node("a")
    topo.add_node("b")
    topo.add_link("ab", "a", "b", capacity)
    return topo


def transfer(rid, size, *, user="alex", priority=0, bandwidth=None, constraint=None,
             source="a", dest="b", factor=1):
    return RequestSpec(rid, user, RequestKind.TRANSFER, source, dest, priority, size=size,
                       bandwidth=bandwidth, constraint=constraint or TimeConstraint(),
                       throughput_factor=Fraction(factor))


def reservation(rid, bandwidth, start, duration, *, user="alex", priority=0, source="a", dest="b"):
    return RequestSpec(rid, user, RequestKind.RESERVATION, source, dest, priority,
                       bandwidth=bandwidth, start=start, duration=duration)
