"""
Fixed-capacity pool of node partitions driven by a known bucket order.

Eviction picks the partition used furthest in the future, a background thread prefetches
the next partition the plan needs, and evicted dirty partitions are written back in the
background. Memory: c resident blocks plus one prefetch and one writeback staging block.
"""

import logging
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from ..graph.storage import PartitionBlock
from ..ordering.plan import OrderingPlan
from ..ordering.simulator import NextUseIndex
from ..utils.errors import BufferCapacityError, PartitionIOError, PlanMismatchError
from .io import PartitionIO

logger = logging.getLogger(__name__)


@dataclass
class BufferStats:
    fills: int = 0
    misses: int = 0
    hits: int = 0
    reads: int = 0
    writes: int = 0
    bytes_read: int = 0
    bytes_written: int = 0
    stall_seconds: float = 0.0
    peak_blocks: int = 0
    acquire_stalls: List[float] = field(default_factory=list)

    @property
    def bytes_total(self) -> int:
        return self.bytes_read + self.bytes_written

    def as_dict(self) -> Dict[str, float]:
        out = asdict(self)
        out.pop("acquire_stalls")
        out["bytes_total"] = self.bytes_total
        return out


class PartitionBuffer:
    """
    Buffer of at most `capacity` resident partitions replaying an OrderingPlan.

    Args:
        io: Partition backend
        plan: Bucket order; acquire_pair must follow plan.bucket_sequence
        capacity: Resident blocks (defaults to plan.capacity)
        prefetch: Background prefetch and writeback; False makes all IO synchronous
        read_only: Skip dirty marking and writeback (evaluation passes)
        wait_timeout: Seconds to wait for a pin release when every resident block is pinned
    """

    def __init__(
        self,
        io: PartitionIO,
        plan: OrderingPlan,
        capacity: Optional[int] = None,
        prefetch: bool = True,
        read_only: bool = False,
        wait_timeout: float = 5.0,
    ):
        self.io = io
        self.capacity = plan.capacity if capacity is None else capacity
        if plan.num_partitions != io.num_partitions:
            raise PlanMismatchError(
                f"plan has {plan.num_partitions} partitions, storage has {io.num_partitions}"
            )
        if plan.capacity > self.capacity:
            raise PlanMismatchError(
                f"plan assumes capacity {plan.capacity}, buffer holds {self.capacity}"
            )
        self.prefetch_enabled = prefetch
        self.read_only = read_only
        self.wait_timeout = wait_timeout
        self.stats = BufferStats()

        self._cond = threading.Condition()
        self._resident: Dict[int, PartitionBlock] = {}
        self._pins: Dict[int, int] = {}
        self._dirty: Set[int] = set()

        self._prefetch_pool = ThreadPoolExecutor(1, thread_name_prefix="prefetch") if prefetch else None
        self._write_pool = ThreadPoolExecutor(1, thread_name_prefix="writeback") if prefetch else None
        self._prefetch: Optional[Tuple[int, Future]] = None
        self._write: Optional[Tuple[int, Future]] = None
        self._stats_lock = threading.Lock()
        self._last_eviction_stall = 0.0

        self.set_plan(plan)

    # plan

    def set_plan(self, plan: OrderingPlan) -> None:
        """Start replaying a plan from its first bucket; the buffer should be empty."""
        self.plan = plan
        self._sequence = plan.bucket_sequence
        self._index = NextUseIndex(self._sequence, plan.num_partitions)
        self._cursor = 0
        self._schedule_prefetch()

    @property
    def cursor(self) -> int:
        return self._cursor

    @property
    def resident(self) -> List[int]:
        with self._cond:
            return sorted(self._resident)

    @property
    def dirty(self) -> List[int]:
        with self._cond:
            return sorted(self._dirty)

    def pin_count(self, partition_id: int) -> int:
        with self._cond:
            return self._pins.get(partition_id, 0)

    # IO helpers

    def _count_read(self, partition_id: int) -> None:
        with self._stats_lock:
            self.stats.reads += 1
            self.stats.bytes_read += self.io.partition_bytes(partition_id)

    def _count_write(self, partition_id: int) -> None:
        with self._stats_lock:
            self.stats.writes += 1
            self.stats.bytes_written += self.io.partition_bytes(partition_id)

    def _load_task(self, partition_id: int, pending_write: Optional[Future]) -> PartitionBlock:
        if pending_write is not None:
            pending_write.result()
        block = self.io.read(partition_id)
        self._count_read(partition_id)
        return block

    def _write_task(self, partition_id: int, block: PartitionBlock) -> None:
        self.io.write(partition_id, block)
        self._count_write(partition_id)

    def _blocks_held(self) -> int:
        held = len(self._resident)
        if self._prefetch is not None:
            held += 1
        if self._write is not None and not self._write[1].done():
            held += 1
        return held

    def _note_peak(self) -> None:
        self.stats.peak_blocks = max(self.stats.peak_blocks, self._blocks_held())

    def _wait(self, future: Future) -> float:
        """Block on a future; returns the seconds actually waited."""
        if future.done():
            future.result()
            return 0.0
        start = time.perf_counter()
        future.result()
        return time.perf_counter() - start

    def _pending_write_for(self, partition_id: int) -> Optional[Future]:
        if self._write is not None and self._write[0] == partition_id:
            return self._write[1]
        return None

    def _check_writeback(self) -> None:
        """Surface a failed background write."""
        if self._write is not None and self._write[1].done():
            partition_id, future = self._write
            self._write = None
            error = future.exception()
            if error is not None:
                raise error if isinstance(error, PartitionIOError) else PartitionIOError(partition_id, error)

    def _next_target(self) -> Optional[int]:
        """Next partition in plan order that is not resident."""
        for t in range(self._cursor, len(self._sequence)):
            for q in self._sequence[t]:
                if q not in self._resident:
                    return q
        return None

    def _schedule_prefetch(self) -> None:
        if self._prefetch_pool is None or self._prefetch is not None:
            return
        target = self._next_target()
        if target is None:
            return
        future = self._prefetch_pool.submit(self._load_task, target, self._pending_write_for(target))
        self._prefetch = (target, future)
        self._note_peak()

    def _fetch(self, partition_id: int) -> Tuple[PartitionBlock, float]:
        """Obtain a block for admission; returns (block, stall seconds)."""
        if self._prefetch is not None and self._prefetch[0] == partition_id:
            _, future = self._prefetch
            self._prefetch = None
            try:
                stall = self._wait(future)
            except PartitionIOError:
                raise
            except Exception as e:
                raise PartitionIOError(partition_id, e) from e
            return future.result(), stall

        start = time.perf_counter()
        pending = self._pending_write_for(partition_id)
        if pending is not None:
            pending.result()
        block = self.io.read(partition_id)
        self._count_read(partition_id)
        return block, time.perf_counter() - start

    def _writeback(self, partition_id: int, block: PartitionBlock) -> float:
        if self._write_pool is None:
            start = time.perf_counter()
            self._write_task(partition_id, block)
            return time.perf_counter() - start
        stall = 0.0
        if self._write is not None:
            previous_id, previous = self._write
            try:
                stall = self._wait(previous)
            except Exception as e:
                raise e if isinstance(e, PartitionIOError) else PartitionIOError(previous_id, e)
        self._write = (partition_id, self._write_pool.submit(self._write_task, partition_id, block))
        return stall

    # eviction

    def evict_furthest(self, exclude: Tuple[int, ...] = ()) -> Optional[int]:
        """
        Evict the unpinned resident block with the furthest next use.

        Dirty blocks go to writeback. When every candidate is pinned, blocks until a
        release_pair() frees one, for at most wait_timeout seconds (5.0 by default);
        after that it raises BufferCapacityError.

        Returns:
            The evicted partition id, or None if the buffer had a free slot
        """
        with self._cond:
            if len(self._resident) < self.capacity:
                return None
            deadline = time.monotonic() + self.wait_timeout
            while True:
                candidates = [
                    q for q in self._resident
                    if q not in exclude and self._pins.get(q, 0) == 0
                ]
                if candidates:
                    break
                remaining = deadline - time.monotonic()
                if remaining <= 0 or not self._cond.wait(remaining):
                    raise BufferCapacityError(
                        f"all {len(self._resident)} resident partitions are pinned"
                    )
            victim = self._index.furthest(candidates, self._cursor)
            block = self._resident.pop(victim)
            was_dirty = victim in self._dirty
            self._dirty.discard(victim)

        stall = 0.0
        if was_dirty and not self.read_only:
            stall = self._writeback(victim, block)
        self.stats.stall_seconds += stall
        self._last_eviction_stall = stall
        self._note_peak()
        return victim

    # acquire / release

    def acquire_pair(self, i: int, j: int) -> Tuple[PartitionBlock, PartitionBlock]:
        """
        Make partitions i and j resident and pin them.

        The pair must be the plan's next bucket. i == j returns one block twice, pinned twice.
        """
        if self._cursor >= len(self._sequence) or self._sequence[self._cursor] != (i, j):
            expected = self._sequence[self._cursor] if self._cursor < len(self._sequence) else None
            raise PlanMismatchError(f"acquire ({i}, {j}) but the plan expects {expected}")

        self._check_writeback()
        stall = 0.0
        for q in dict.fromkeys((i, j)):
            with self._cond:
                present = q in self._resident
            if present:
                self.stats.hits += 1
                continue
            self._last_eviction_stall = 0.0
            evicted = self.evict_furthest(exclude=(i, j))
            stall += self._last_eviction_stall
            block, fetch_stall = self._fetch(q)
            stall += fetch_stall
            self.stats.stall_seconds += fetch_stall
            with self._cond:
                self._resident[q] = block
                if evicted is None:
                    self.stats.fills += 1
                else:
                    self.stats.misses += 1
            self._note_peak()
            logger.debug("admitted partition %d (evicted %s)", q, evicted)

        with self._cond:
            self._pins[i] = self._pins.get(i, 0) + 1
            self._pins[j] = self._pins.get(j, 0) + 1
            if not self.read_only:
                self._dirty.update((i, j))
            blocks = (self._resident[i], self._resident[j])

        self.stats.acquire_stalls.append(stall)
        self._cursor += 1
        self._schedule_prefetch()
        return blocks

    def release_pair(self, i: int, j: int) -> None:
        with self._cond:
            for q in (i, j):
                count = self._pins.get(q, 0)
                if count <= 0:
                    raise PlanMismatchError(f"partition {q} released more often than acquired")
                self._pins[q] = count - 1
            self._cond.notify_all()

    # epoch end

    def flush(self) -> None:
        """
        Write every dirty resident block, wait for background IO, and empty the buffer.
        """
        with self._cond:
            if any(self._pins.values()):
                raise BufferCapacityError("cannot flush while partitions are pinned")
        if self._prefetch is not None:
            _, future = self._prefetch
            self._prefetch = None
            try:
                future.result()
            except Exception as e:
                logger.warning("discarding failed prefetch at flush: %s", e)
        if self._write is not None:
            partition_id, future = self._write
            self._write = None
            try:
                future.result()
            except Exception as e:
                raise e if isinstance(e, PartitionIOError) else PartitionIOError(partition_id, e)

        with self._cond:
            residents = sorted(self._resident.items())
            dirty = set(self._dirty)
            self._resident.clear()
            self._dirty.clear()
            self._pins.clear()
        for partition_id, block in residents:
            if partition_id in dirty and not self.read_only:
                self._write_task(partition_id, block)
        logger.debug("flushed %d partitions", len(residents))

    def close(self) -> None:
        for pool in (self._prefetch_pool, self._write_pool):
            if pool is not None:
                pool.shutdown(wait=True)

    def __enter__(self) -> "PartitionBuffer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
