"""
Ordering generators.

All generators return an OrderingPlan whose buffer trace is the furthest-next-use replay
of its bucket sequence, so a buffer replaying the plan sees exactly plan.swap_count misses.
"""

import logging
from typing import Iterator, List, Optional, Set

import numpy as np

from .plan import Bucket, BufferStep, OrderingPlan, _check_pc
from .simulator import plan_from_sequence

logger = logging.getLogger(__name__)

ORDERINGS = ("elimination", "hilbert", "hilbert_symmetric", "random", "sequential")


def _elimination_schedule(p: int, c: int, rng: np.random.Generator) -> List[BufferStep]:
    """
    Round-based admission schedule.

    Each round fixes c-1 unretired partitions, streams every other unretired partition
    through the remaining slot, then retires the fixed ones. Buckets are emitted the first
    time both of their partitions are resident, sorted within one admission.
    """
    resident: List[int] = []
    retired: Set[int] = set()
    processed = np.zeros((p, p), dtype=bool)
    steps: List[BufferStep] = []

    def admit(q: int, evicted: Optional[int]) -> None:
        if evicted is not None:
            resident.remove(evicted)
        resident.append(q)
        new = []
        for r in resident:
            for i, j in ((q, r), (r, q)):
                if not processed[i, j]:
                    processed[i, j] = True
                    new.append((i, j))
        steps.append(BufferStep(q, evicted, tuple(sorted(resident)), tuple(sorted(new))))

    def retired_victim() -> Optional[int]:
        if len(resident) < c:
            return None
        return min(r for r in resident if r in retired)

    unretired = [int(q) for q in rng.permutation(p)]
    while unretired:
        if len(unretired) <= c:
            for q in unretired:
                if q not in resident:
                    admit(q, retired_victim())
            break

        carried = [q for q in unretired if q in resident]
        fresh = [q for q in unretired if q not in resident]
        fresh = [fresh[k] for k in rng.permutation(len(fresh))]
        fixed = carried + fresh[:c - 1 - len(carried)]
        for q in fixed:
            if q not in resident:
                admit(q, retired_victim())

        streamed = [q for q in fresh if q not in fixed]
        previous = None
        for q in streamed:
            if len(resident) < c:
                victim = None
            elif previous is not None:
                victim = previous
            else:
                victim = retired_victim()
            admit(q, victim)
            previous = q

        retired.update(fixed)
        unretired = [q for q in unretired if q not in retired]
    return steps


def elimination_order(p: int, c: int, seed: int = 0) -> OrderingPlan:
    """Edge-bucket order that eliminates c-1 partitions per round."""
    _check_pc(p, c)
    rng = np.random.default_rng(seed)
    schedule = _elimination_schedule(p, c, rng)
    sequence = [b for step in schedule for b in step.buckets]
    return plan_from_sequence("elimination", sequence, p, c, seed)


def _d2xy(n: int, d: int):
    x = y = 0
    s = 1
    t = d
    while s < n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    return x, y


def hilbert_cells(p: int) -> Iterator[Bucket]:
    """Cells of the p x p bucket matrix in Hilbert-curve order (row = y, column = x)."""
    n = 1
    while n < p:
        n *= 2
    for d in range(n * n):
        x, y = _d2xy(n, d)
        if x < p and y < p:
            yield (y, x)


def _default_capacity(p: int, capacity: Optional[int]) -> int:
    c = min(2, p) if capacity is None else capacity
    _check_pc(p, c)
    return c


def hilbert_order(p: int, capacity: Optional[int] = None) -> OrderingPlan:
    c = _default_capacity(p, capacity)
    return plan_from_sequence("hilbert", list(hilbert_cells(p)), p, c)


def hilbert_symmetric_order(p: int, capacity: Optional[int] = None) -> OrderingPlan:
    """Hilbert order where each bucket is immediately followed by its transpose."""
    c = _default_capacity(p, capacity)
    seen: Set[Bucket] = set()
    sequence: List[Bucket] = []
    for i, j in hilbert_cells(p):
        if (i, j) in seen:
            continue
        sequence.append((i, j))
        seen.add((i, j))
        if i != j:
            sequence.append((j, i))
            seen.add((j, i))
    return plan_from_sequence("hilbert_symmetric", sequence, p, c)


def random_order(p: int, seed: int = 0, capacity: Optional[int] = None) -> OrderingPlan:
    c = _default_capacity(p, capacity)
    rng = np.random.default_rng(seed)
    sequence = [(int(k) // p, int(k) % p) for k in rng.permutation(p * p)]
    return plan_from_sequence("random", sequence, p, c, seed)


def sequential_order(p: int, capacity: Optional[int] = None) -> OrderingPlan:
    """Self-buckets 0..p-1: streams every partition once, e.g. for read-only passes."""
    c = 1 if capacity is None else capacity
    if not 1 <= c <= p:
        raise ValueError(f"capacity {c} outside [1, {p}]")
    return plan_from_sequence("sequential", [(k, k) for k in range(p)], p, c, covers_all=False)


def make_plan(kind: str, p: int, c: int, seed: int = 0) -> OrderingPlan:
    """Build a plan by ordering name."""
    kind = kind.lower()
    if kind == "elimination":
        plan = elimination_order(p, c, seed)
    elif kind == "hilbert":
        plan = hilbert_order(p, c)
    elif kind == "hilbert_symmetric":
        plan = hilbert_symmetric_order(p, c)
    elif kind == "random":
        plan = random_order(p, seed, c)
    elif kind == "sequential":
        plan = sequential_order(p, c)
    else:
        raise ValueError(f"unknown ordering {kind!r}, expected one of {ORDERINGS}")
    logger.debug("%s plan p=%d c=%d: %d swaps", kind, p, c, plan.swap_count)
    return plan
