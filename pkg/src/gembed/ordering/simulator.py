"""
Belady (furthest next use) buffer replay and exhaustive minimum-swap search for tiny p.
"""

import bisect
import itertools
import math
from collections import deque
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from ..utils.errors import PlanMismatchError
from .plan import Bucket, BufferStep, OrderingPlan, _check_pc

NEVER = math.inf


class NextUseIndex:
    """Answers "when is partition q next needed after position t" for a bucket sequence."""

    def __init__(self, bucket_sequence: Sequence[Bucket], num_partitions: int):
        self._uses: List[List[int]] = [[] for _ in range(num_partitions)]
        for t, (i, j) in enumerate(bucket_sequence):
            self._uses[i].append(t)
            if j != i:
                self._uses[j].append(t)

    def next_use(self, partition: int, position: int) -> float:
        uses = self._uses[partition]
        k = bisect.bisect_right(uses, position)
        return uses[k] if k < len(uses) else NEVER

    def furthest(self, candidates: Iterable[int], position: int) -> Optional[int]:
        """Candidate with the furthest next use after position; ties go to the lower id."""
        best = None
        best_key = None
        for q in sorted(candidates):
            key = self.next_use(q, position)
            if best_key is None or key > best_key:
                best, best_key = q, key
        return best


def belady_trace(
    bucket_sequence: Sequence[Bucket],
    num_partitions: int,
    capacity: int,
) -> List[BufferStep]:
    """
    Replay a bucket order through a buffer with furthest-next-use eviction.

    For each bucket, missing partitions are loaded i first then j; the bucket's own
    partitions are never evicted for it.
    """
    index = NextUseIndex(bucket_sequence, num_partitions)
    resident: Set[int] = set()
    steps: List[BufferStep] = []
    pending: List[Bucket] = []

    def close_step() -> None:
        if steps:
            last = steps[-1]
            steps[-1] = BufferStep(last.admitted, last.evicted, last.resident, last.buckets + tuple(pending))
        pending.clear()

    for t, (i, j) in enumerate(bucket_sequence):
        for q in (i, j):
            if q in resident:
                continue
            evicted = None
            if len(resident) >= capacity:
                evicted = index.furthest(resident - {i, j}, t)
                if evicted is None:
                    raise PlanMismatchError(
                        f"capacity {capacity} cannot hold bucket ({i}, {j})"
                    )
                resident.discard(evicted)
            close_step()
            resident.add(q)
            steps.append(BufferStep(q, evicted, tuple(sorted(resident)), ()))
        pending.append((i, j))
    close_step()
    return steps


def plan_from_sequence(
    kind: str,
    bucket_sequence: Sequence[Bucket],
    num_partitions: int,
    capacity: int,
    seed: int = 0,
    covers_all: bool = True,
) -> OrderingPlan:
    steps = belady_trace(bucket_sequence, num_partitions, capacity)
    return OrderingPlan(kind, num_partitions, capacity, seed, steps, covers_all)


def count_belady_swaps(bucket_sequence: Sequence[Bucket], num_partitions: int, capacity: int) -> int:
    return sum(1 for s in belady_trace(bucket_sequence, num_partitions, capacity) if s.is_swap)


def min_swaps_bruteforce(p: int, c: int) -> int:
    """
    Fewest swaps over all buffer sequences that bring every pair of partitions together.

    Breadth-first search over (resident set, covered pairs); practical for p <= 5.
    """
    _check_pc(p, c)
    if p == c:
        return 0
    pairs = list(itertools.combinations(range(p), 2))
    pair_bit: Dict[Tuple[int, int], int] = {pr: 1 << k for k, pr in enumerate(pairs)}
    goal = (1 << len(pairs)) - 1

    def cover(members: Iterable[int]) -> int:
        mask = 0
        for pr in itertools.combinations(sorted(members), 2):
            mask |= pair_bit[pr]
        return mask

    start_states = []
    for members in itertools.combinations(range(p), c):
        start_states.append((frozenset(members), cover(members)))

    seen = set(start_states)
    queue = deque((state, 0) for state in start_states)
    while queue:
        (resident, mask), depth = queue.popleft()
        if mask == goal:
            return depth
        for out in resident:
            kept = resident - {out}
            for q in range(p):
                if q in resident:
                    continue
                new_mask = mask
                for r in kept:
                    new_mask |= pair_bit[(min(q, r), max(q, r))]
                state = (kept | {q}, new_mask)
                if state not in seen:
                    seen.add(state)
                    queue.append((state, depth + 1))
    raise RuntimeError("search exhausted without covering all pairs")
