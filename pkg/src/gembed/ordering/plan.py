"""
Edge-bucket orderings: the plan type, swap bounds and IO accounting.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import pandas as pd

from ..utils.errors import PlanMismatchError

Bucket = Tuple[int, int]


@dataclass(frozen=True)
class BufferStep:
    """
    One admission into the buffer and the buckets processed right after it.

    evicted is None for an admission into a free slot (initial fill).
    """

    admitted: int
    evicted: Optional[int]
    resident: Tuple[int, ...]
    buckets: Tuple[Bucket, ...]

    @property
    def is_swap(self) -> bool:
        return self.evicted is not None


@dataclass
class OrderingPlan:
    """
    A bucket traversal order with its precomputed buffer trace.

    Attributes:
        kind: Generator name
        num_partitions: p
        capacity: c
        seed: Seed used for random choices
        steps: Admissions in order; their buckets concatenate to bucket_sequence
        covers_all: False for plans that visit only some buckets (read-only streaming)
    """

    kind: str
    num_partitions: int
    capacity: int
    seed: int
    steps: List[BufferStep] = field(default_factory=list)
    covers_all: bool = True

    @property
    def bucket_sequence(self) -> List[Bucket]:
        return [b for step in self.steps for b in step.buckets]

    @property
    def swap_events(self) -> List[Tuple[int, int]]:
        return [(s.evicted, s.admitted) for s in self.steps if s.evicted is not None]

    @property
    def swap_count(self) -> int:
        return sum(1 for s in self.steps if s.is_swap)

    @property
    def fill_count(self) -> int:
        return sum(1 for s in self.steps if not s.is_swap)

    @property
    def buffer_trace(self) -> List[Tuple[int, ...]]:
        return [s.resident for s in self.steps]

    def admission_sequence(self) -> List[int]:
        return [s.admitted for s in self.steps]

    def validate(self) -> "OrderingPlan":
        """Check every plan invariant; raises PlanMismatchError on the first violation."""
        p, c = self.num_partitions, self.capacity
        if not 1 <= c <= p:
            raise PlanMismatchError(f"capacity {c} outside [1, {p}]")

        sequence = self.bucket_sequence
        if len(set(sequence)) != len(sequence):
            raise PlanMismatchError("bucket visited more than once")
        for i, j in sequence:
            if not (0 <= i < p and 0 <= j < p):
                raise PlanMismatchError(f"bucket ({i}, {j}) outside [0, {p})^2")
        if self.covers_all and len(sequence) != p * p:
            raise PlanMismatchError(f"plan visits {len(sequence)} of {p * p} buckets")

        previous: Tuple[int, ...] = ()
        for k, step in enumerate(self.steps):
            resident = set(step.resident)
            if len(resident) > c:
                raise PlanMismatchError(f"step {k} holds {len(resident)} partitions, capacity is {c}")
            expected = set(previous) - ({step.evicted} if step.evicted is not None else set())
            expected.add(step.admitted)
            if resident != expected or step.admitted in previous:
                raise PlanMismatchError(f"step {k} is not a single admission from {previous}")
            if step.evicted is None and len(previous) >= c:
                raise PlanMismatchError(f"step {k} fills a full buffer")
            for i, j in step.buckets:
                if i not in resident or j not in resident:
                    raise PlanMismatchError(f"bucket ({i}, {j}) processed while not resident at step {k}")
            previous = step.resident
        return self

    def trace_frame(self) -> pd.DataFrame:
        """Per-step trace: admission, eviction, resident set and buckets processed."""
        rows = []
        for k, step in enumerate(self.steps):
            rows.append({
                "step": k,
                "admitted": step.admitted,
                "evicted": -1 if step.evicted is None else step.evicted,
                "resident": " ".join(map(str, step.resident)),
                "buckets": " ".join(f"{i}-{j}" for i, j in step.buckets),
                "num_buckets": len(step.buckets),
            })
        return pd.DataFrame(rows, columns=["step", "admitted", "evicted", "resident", "buckets", "num_buckets"])


def plan_trace_frame(plan: OrderingPlan) -> pd.DataFrame:
    return plan.trace_frame()


def _check_pc(p: int, c: int) -> None:
    if p < 1 or c < 1:
        raise ValueError(f"p and c must be >= 1, got p={p}, c={c}")
    if c > p:
        raise ValueError(f"capacity c={c} exceeds p={p}")
    if c == 1 and p > 1:
        raise ValueError("capacity 1 cannot hold a pair of partitions (need c >= 2 when p > 1)")


def lower_bound_swaps(p: int, c: int) -> int:
    """ceil((p(p-1)/2 - c(c-1)/2) / (c-1)); zero when everything fits."""
    _check_pc(p, c)
    if p == c:
        return 0
    uncovered = p * (p - 1) // 2 - c * (c - 1) // 2
    return -(-uncovered // (c - 1))


def elimination_swap_count(p: int, c: int) -> int:
    """Closed-form swap count of the elimination ordering."""
    _check_pc(p, c)
    if p == c:
        return 0
    x = (p - c) // (c - 1)
    return (p - c) + (x + 1) * (p - c) - (x + 1) * x * (c - 1) // 2


@dataclass(frozen=True)
class SwapBound:
    num_partitions: int
    capacity: int
    lower_bound: int
    elimination_count: int
    x: int

    @property
    def ratio(self) -> float:
        return self.elimination_count / self.lower_bound if self.lower_bound else 1.0


def swap_bound(p: int, c: int) -> SwapBound:
    x = (p - c) // (c - 1) if c > 1 else 0
    return SwapBound(p, c, lower_bound_swaps(p, c), elimination_swap_count(p, c), x)


@dataclass(frozen=True)
class IOReport:
    reads: int
    writes: int
    total_bytes: int

    def as_dict(self) -> Dict[str, int]:
        return {"reads": self.reads, "writes": self.writes, "total_bytes": self.total_bytes}


def simulate_io(plan: OrderingPlan, partition_bytes: int, read_only: bool = False) -> IOReport:
    """
    Partition IO of one epoch over the plan.

    Every admission is a read. During training every evicted partition is dirty and every
    partition left resident is flushed at the end.
    """
    reads = plan.fill_count + plan.swap_count
    if read_only:
        writes = 0
    else:
        final_residents = len(plan.steps[-1].resident) if plan.steps else 0
        writes = plan.swap_count + final_residents
    return IOReport(reads, writes, (reads + writes) * int(partition_bytes))
