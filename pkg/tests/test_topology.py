from __future__ import annotations

import random

import oracles
import pytest
from helpers import make_testbed

from gridsched.errors import DuplicateLink, DuplicateNode, InvalidCapacity, UnknownNode
from gridsched.topology import Link, Path, Topology


def test_add_node_and_duplicate():
    topo = Topology()
    topo.add_node("gs")
    assert list(topo.nodes) == ["gs"]
    with pytest.raises(DuplicateNode):
        topo.add_node("gs")
    topo.add_node("tschedUPB1")
    topo.add_node("tschedUPB2")
    assert len(topo.nodes) == 3


def test_add_link_validation():
    topo = make_testbed()
    assert topo.links["link2"].capacity == 100000
    assert topo.links["link1"].capacity == 50000
    with pytest.raises(InvalidCapacity):
        topo.add_link("bad", "gs", "tschedUPB1", 0)
    with pytest.raises(UnknownNode):
        topo.add_link("bad", "gs", "nowhere", 10)
    with pytest.raises(DuplicateLink):
        topo.add_link("link1", "gs", "tschedUPB1", 10)
    with pytest.raises(ValueError):
        topo.add_link("loop", "gs", "gs", 10)


def test_testbed_paths():
    topo = make_testbed()
    paths = topo.enumerate_paths("gs", "tschedUPB2")
    assert [p.link_ids for p in paths] == [("link2",)]
    assert paths[0].bottleneck == 100000
    assert topo.enumerate_paths("tschedUPB1", "gs") == []
    with pytest.raises(UnknownNode):
        topo.enumerate_paths("gs", "mars")


def test_diamond_ordering():
    topo = Topology()
    for n in "ABCD":
        topo.add_node(n)
    topo.add_link("ab", "A", "B", 50)
    topo.add_link("bd", "B", "D", 80)
    topo.add_link("ac", "A", "C", 60)
    topo.add_link("cd", "C", "D", 70)
    paths = topo.enumerate_paths("A", "D")
    assert [p.nodes for p in paths] == [("A", "C", "D"), ("A", "B", "D")]
    assert [p.bottleneck for p in paths] == [60, 50]


def test_path_rejects_broken_chain():
    a = Link("x", "x", "A", "B", 10)
    b = Link("y", "y", "C", "D", 10)
    with pytest.raises(ValueError):
        Path((a, b))
    back = Link("z", "z", "B", "A", 10)
    with pytest.raises(ValueError):
        Path((a, back))


def random_topology(rng, n_nodes, n_links):
    topo = Topology()
    nodes = [f"n{i}" for i in range(n_nodes)]
    for n in nodes:
        topo.add_node(n)
    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    for i, (a, b) in enumerate(rng.sample(pairs, min(n_links, len(pairs)))):
        topo.add_link(f"l{i}", a, b, rng.choice([10, 20, 50, 100]))
    return topo


@pytest.mark.parametrize("seed", range(40))
def test_enumeration_matches_brute_force(seed):
    rng = random.Random(seed)
    topo = random_topology(rng, rng.randint(2, 8), rng.randint(1, 14))
    raw = {lid: (l.source, l.dest, l.capacity) for lid, l in topo.links.items()}
    nodes = list(topo.nodes)
    for _ in range(5):
        s, d = rng.sample(nodes, 2)
        expected = oracles.rank_paths(raw, oracles.all_simple_paths(raw, s, d))
        got = topo.enumerate_paths(s, d, max_paths=None)
        assert [p.link_ids for p in got] == expected
        for p in got:
            assert p.bottleneck == min(raw[l][2] for l in p.link_ids)
        assert [p.link_ids for p in topo.enumerate_paths(s, d, 2)] == expected[:2]
        assert topo.enumerate_paths(s, d) == topo.enumerate_paths(s, d)
