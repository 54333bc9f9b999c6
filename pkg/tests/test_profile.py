from __future__ import annotations

import random

import numpy as np
import oracles
import pytest

from gridsched.errors import (
    InsufficientBandwidth,
    InvalidCapacity,
    NoFit,
    UnknownRequest,
)
from gridsched.profile import (
    INF,
    BandwidthProfile,
    Interval,
    ProfileKind,
    duration_for,
    new_profile,
    path_availability,
)


def stepped(*pieces, capacity=50000):
    """Profile from ``(begin, end, available)`` pieces plus a full-capacity tail."""
    intervals = [Interval(b, e, a) for b, e, a in pieces]
    tail = pieces[-1][1] if pieces else 0
    intervals.append(Interval(tail, INF, capacity))
    return BandwidthProfile(capacity, ProfileKind.LINK, intervals)


def test_new_profile():
    assert new_profile(50000).rows() == [(0, INF, 50000, [])]
    assert new_profile(100000).rows() == [(0, INF, 100000, [])]
    with pytest.raises(InvalidCapacity):
        new_profile(0)


def test_duration_rounds_up():
    assert duration_for(1000, 1000) == 1000
    assert duration_for(1001, 1000) == 1001
    assert duration_for(1, 3) == 334


def test_reserve_full_window():
    p = new_profile(50000)
    p.reserve(0, 10000, 50000, "r")
    assert p.rows() == [(0, 10000, 0, []), (10000, INF, 50000, [])]


def test_reserve_zero_only_splits():
    p = new_profile(50000)
    p.reserve(100, 200, 0, "r")
    assert [iv.available for iv in p.intervals] == [50000] * len(p.intervals)


def test_min_available_inside_reservation():
    p = new_profile(50000)
    p.reserve(100000, 200000, 30000, "r")
    assert p.min_available(150000, 160000) == 20000
    assert p.min_available(0, 100000) == 50000
    avail = oracles.timeline(50000, [(100000, 200000, 30000)], 250000)
    assert int(avail[150000:160000].min()) == 20000


def test_full_request_leaves_nothing():
    p = new_profile(50000)
    p.reserve(0, 100000, 50000, "alex-237")
    assert p.min_available(20000, 30000) == 0


def test_reserve_insufficient():
    p = new_profile(50000)
    p.reserve(0, 100, 40000, "a")
    with pytest.raises(InsufficientBandwidth):
        p.reserve(50, 150, 20000, "b")
    assert p.rows() == [(0, 100, 10000, []), (100, INF, 50000, [])]


def test_release_roundtrip_and_unknown():
    p = new_profile(50000)
    before = p.rows()
    p.reserve(10, 20, 5, "a")
    p.release("a")
    assert p.rows() == before
    with pytest.raises(UnknownRequest):
        p.release("a")


def test_release_one_of_two_matches_rebuild():
    p = new_profile(1000)
    p.reserve(0, 100, 300, "a")
    p.reserve(50, 150, 400, "b")
    p.release("a")
    got = oracles.profile_timeline(p, 200)
    assert np.array_equal(got, oracles.timeline(1000, [(50, 150, 400)], 200))


def test_path_profiles_track_request_ids():
    p = new_profile(100, ProfileKind.PATH)
    p.reserve(0, 10, 10, "a")
    p.reserve(5, 15, 10, "b")
    assert [iv.requests for iv in p.intervals[:3]] == [
        frozenset({"a"}), frozenset({"a", "b"}), frozenset({"b"})]
    link = new_profile(100)
    link.reserve(0, 10, 10, "a")
    assert all(not iv.requests for iv in link.intervals)


def test_first_fit_examples():
    assert new_profile(50000).first_fit(0, 100, 50000) == 0
    p = stepped((0, 100000, 20000))
    assert p.first_fit(0, 10000, 25000) == 100000
    with pytest.raises(NoFit):
        p.first_fit(0, 10, 50001)


def test_last_fit_examples():
    p = stepped((0, 100000, 50000), (100000, 200000, 10000))
    assert p.last_fit(50000, 20000, 0) == 50000
    assert new_profile(50000).last_fit(1000, 10, 0) == 0
    assert p.last_fit(50000, 20000, 150000) == 200000


def test_path_availability_examples():
    a = new_profile(100000)
    b = new_profile(50000)
    assert path_availability([a]).rows() == a.rows()
    assert path_availability([a, b]).rows() == [(0, INF, 50000, [])]
    a.reserve(0, 50000, 30000, "x")
    assert path_availability([a, b]).rows() == [(0, INF, 50000, [])]
    a.release("x")
    a.reserve(0, 50000, 60000, "x")
    assert path_availability([a, b]).rows() == [(0, 50000, 40000, []), (50000, INF, 50000, [])]


def random_profile(rng, capacity=100, horizon=2000, max_res=10):
    p = new_profile(capacity)
    booked = []
    for i in range(rng.randint(0, max_res)):
        b = rng.randrange(horizon)
        e = b + rng.randint(1, horizon // 4)
        bw = rng.randint(1, capacity)
        try:
            p.reserve(b, e, bw, f"r{i}")
        except InsufficientBandwidth:
            continue
        booked.append((f"r{i}", b, e, bw))
    return p, booked


@pytest.mark.parametrize("seed", range(60))
def test_random_reserve_release_matches_rebuild(seed):
    rng = random.Random(seed)
    p, booked = random_profile(rng)
    while booked:
        horizon = max(e for _, _, e, _ in booked) + 10
        expected = oracles.timeline(100, [(b, e, bw) for _, b, e, bw in booked], horizon)
        assert np.array_equal(oracles.profile_timeline(p, horizon), expected)
        rid = booked.pop(rng.randrange(len(booked)))[0]
        p.release(rid)
    assert p.rows() == [(0, INF, 100, [])]


@pytest.mark.parametrize("seed", range(30))
def test_path_availability_is_pointwise_min(seed):
    rng = random.Random(seed)
    profs = [random_profile(rng, capacity=rng.choice([50, 100]))[0] for _ in range(rng.randint(1, 4))]
    combined = path_availability(profs)
    horizon = 3000
    expected = np.min([oracles.profile_timeline(p, horizon) for p in profs], axis=0)
    assert np.array_equal(oracles.profile_timeline(combined, horizon), expected)
    assert combined.base_capacity == min(p.base_capacity for p in profs)
    assert path_availability(list(reversed(profs))).rows() == combined.rows()
    assert path_availability(profs + profs).rows() == combined.rows()
