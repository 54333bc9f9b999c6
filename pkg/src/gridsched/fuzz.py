"""Seeded random scenarios for property testing and ``run fuzz --seed N``."""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import pairwise

from .model import ConstraintKind, RequestKind, RequestSpec, TimeConstraint
from .scenario import LinkSpec, Scenario, Settings
from .sim import AcceptPolicy, Submission

CAPACITIES = (10000, 20000, 50000, 100000)
FIXED_BANDWIDTHS = (2000, 5000, 10000, 20000, 30000, 50000)
FACTORS = (Fraction(1, 2), Fraction(3, 4), Fraction(1))


def random_scenario(seed: int, *, max_nodes: int = 6, max_links: int = 8,
                    max_requests: int = 30, users: int = 3) -> Scenario:
    rng = random.Random(seed)
    nodes = [f"n{i}" for i in range(rng.randint(2, max_nodes))]
    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    # a chain keeps most endpoints reachable; the rest is random
    links = []
    for i, (a, b) in enumerate(pairwise(nodes)):
        if len(links) < max_links:
            links.append(LinkSpec(f"l{i}", f"l{i}", a, b, rng.choice(CAPACITIES)))
    extra = rng.randint(0, max(0, max_links - len(links)))
    for a, b in rng.sample(pairs, min(extra, len(pairs))):
        lid = f"l{len(links)}"
        links.append(LinkSpec(lid, lid, a, b, rng.choice(CAPACITIES)))

    submissions = []
    for i in range(rng.randint(1, max_requests)):
        submit = rng.randint(0, 60000)
        source, dest = rng.choice(pairs)
        user = f"u{rng.randrange(users)}"
        priority = rng.randint(0, 9)
        factor = rng.choice(FACTORS)
        if rng.random() < 0.25:
            spec = RequestSpec(f"r{i:02d}", user, RequestKind.RESERVATION, source, dest, priority,
                               bandwidth=rng.choice(FIXED_BANDWIDTHS),
                               start=submit + rng.randint(0, 20000),
                               duration=rng.randint(1000, 20000))
        else:
            kind = rng.choice(list(ConstraintKind))
            bound = submit + rng.randint(0, 20000) if kind.bounded else None
            bandwidth = rng.choice(FIXED_BANDWIDTHS) if rng.random() < 0.4 else None
            spec = RequestSpec(f"r{i:02d}", user, RequestKind.TRANSFER, source, dest, priority,
                               size=rng.randint(10_000, 1_000_000), bandwidth=bandwidth,
                               constraint=TimeConstraint(kind, bound), throughput_factor=factor)
        roll = rng.random()
        accept = (AcceptPolicy("none") if roll < 0.05
                  else AcceptPolicy("index", 1) if roll < 0.1 else AcceptPolicy("first"))
        submissions.append(Submission(submit, spec, accept))
    return Scenario(nodes, links, submissions, Settings())
