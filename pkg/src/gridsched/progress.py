"""Exact progress accounting for running transfers."""

from __future__ import annotations

import math
from fractions import Fraction

from .model import Request, TransferProgress


def start_progress(request: Request, now: int) -> TransferProgress:
    request.progress = TransferProgress(Fraction(0), now, request.throughput_factor)
    return request.progress


def update_progress(request: Request, now: int) -> TransferProgress:
    """Advance ``bytes_moved`` to ``now`` at the current allocation.

    Must run before any change to ``request.bandwidth`` so that each
    constant-rate segment is integrated exactly.
    """
    p = request.progress
    elapsed = now - p.last_update
    if elapsed > 0:
        gained = Fraction(elapsed * request.bandwidth, 1000) * p.factor
        p.moved = min(p.moved + gained, Fraction(request.size))
        p.last_update = now
    return p


def remaining_kbit(request: Request) -> Fraction:
    return Fraction(request.size) - request.progress.moved


def remaining_time(request: Request, bw: int | None = None, factor: Fraction | None = None) -> int:
    """Milliseconds to move what is left at ``bw * factor``, rounded up."""
    bw = request.bandwidth if bw is None else bw
    factor = request.progress.factor if factor is None else factor
    return math.ceil(remaining_kbit(request) * 1000 / (bw * factor))


def recompute_finish(request: Request, now: int) -> int:
    """Instant the transfer will actually complete, given up-to-date progress."""
    return now + remaining_time(request)
