"""
Out-of-core training: edge buckets in plan order over a partition buffer.
"""

import logging
import time
from typing import Optional

from ..buffer.io import DiskPartitionIO
from ..buffer.partition_buffer import PartitionBuffer
from ..graph.storage import GraphStore
from ..model.sampling import DegreeTable
from ..ordering.plan import OrderingPlan
from ..utils.errors import PlanMismatchError
from .config import StalenessConfig, TrainingHyper
from .occupancy import OccupancyRecorder
from .pipelined import StalenessPipeline
from .stats import EpochStats
from .storage import PairNodeStore, RelationTable
from .sync import run_batches_sync

logger = logging.getLogger(__name__)


class PartitionedTrainer:
    """
    Trains from partition files on disk, holding at most `plan.capacity` partitions.

    For each bucket (i, j) of the plan: make i and j resident, draw negatives from the
    nodes of i and j only, train on the bucket's edges, release. Relations stay in memory
    and are written back with the partitions at the end of every epoch. Waits on partition
    IO in acquire_pair and in the end-of-epoch flush go to the recorder as IO stalls.

    Args:
        store: Preprocessed dataset with initialized parameters
        hyper: Model and optimizer settings
        plan: Bucket order for every epoch
        staleness: Pipeline sizing; None trains each bucket synchronously
        prefetch: Background partition prefetch and writeback
        io_delay: Extra seconds per partition read/write
        recorder: Occupancy instrumentation
    """

    def __init__(
        self,
        store: GraphStore,
        hyper: TrainingHyper,
        plan: OrderingPlan,
        staleness: Optional[StalenessConfig] = None,
        prefetch: bool = True,
        io_delay: float = 0.0,
        recorder: Optional[OccupancyRecorder] = None,
    ):
        meta = store.meta
        if plan.num_partitions != meta.num_partitions:
            raise PlanMismatchError(
                f"plan has {plan.num_partitions} partitions, dataset has {meta.num_partitions}"
            )
        if not plan.covers_all:
            raise PlanMismatchError(f"plan '{plan.kind}' does not visit every edge bucket")
        self.store = store
        self.hyper = hyper
        self.plan = plan
        self.staleness = staleness
        self._shared_recorder = recorder
        self.recorder = recorder if recorder is not None else OccupancyRecorder()
        self.buckets = store.load_bucket_store()
        self.relations = RelationTable(store.read_relations())
        self.buffer = PartitionBuffer(DiskPartitionIO(store, io_delay), plan, prefetch=prefetch)
        self._epochs_run = 0
        # buffer counters at the end of the previous epoch
        self._stats_mark: dict = {}

    def _runner(self, progress):
        if self.staleness is None:
            def run(nodes, edges, degree_table, epoch, stats, bucket_key):
                run_batches_sync(
                    nodes, self.relations, edges, degree_table, nodes.pool, self.hyper, epoch,
                    stats, bucket_key=bucket_key, recorder=self.recorder, progress=progress,
                )
            return run

        pipeline = StalenessPipeline(self.hyper, self.staleness, self.recorder, progress)

        def run(nodes, edges, degree_table, epoch, stats, bucket_key):
            pipeline.run(nodes, self.relations, edges, degree_table, nodes.pool, epoch, stats, bucket_key)
        return run

    def train_epoch(self, epoch: int, progress=None) -> EpochStats:
        if self._epochs_run:
            self.buffer.set_plan(self.plan)
        if self._shared_recorder is None:
            self.recorder = OccupancyRecorder()
        p = self.plan.num_partitions
        offsets = self.store.meta.partition_offsets
        run = self._runner(progress)
        stats = EpochStats(epoch, mode="partitioned")

        start = time.perf_counter()
        self.recorder.start()
        try:
            for i, j in self.plan.bucket_sequence:
                block_i, block_j = self.buffer.acquire_pair(i, j)
                self.recorder.record_stall(self.buffer.stats.acquire_stalls[-1])
                try:
                    edges = self.buckets.bucket(i, j)
                    if len(edges):
                        nodes = PairNodeStore(offsets, i, block_i, j, block_j)
                        run(nodes, edges, DegreeTable.from_edges(edges), epoch, stats, i * p + j)
                finally:
                    self.buffer.release_pair(i, j)
            flush_start = time.perf_counter()
            self.buffer.flush()
            self.recorder.record_stall(time.perf_counter() - flush_start)
            self.store.write_relations(self.relations.block)
        finally:
            self.recorder.stop()
        self._epochs_run += 1

        stats.seconds = time.perf_counter() - start
        stats.set_buffer_delta(self._stats_mark, self.buffer.stats)
        self._stats_mark = self.buffer.stats.as_dict()
        stats.busy_fraction = self.recorder.report().busy_fraction
        logger.info(
            "epoch %d: %d edges, mean loss %.4f, %d partition reads, %d writes",
            epoch, stats.num_edges, stats.mean_loss, stats.buffer["reads"], stats.buffer["writes"],
        )
        return stats

    def close(self) -> None:
        self.buffer.close()

    def __enter__(self) -> "PartitionedTrainer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def train_epoch_partitioned(
    store: GraphStore,
    plan: OrderingPlan,
    hyper: TrainingHyper,
    staleness: Optional[StalenessConfig] = None,
    epoch: int = 0,
    prefetch: bool = True,
    io_delay: float = 0.0,
) -> EpochStats:
    """One epoch with a fresh trainer; parameters are read from and written back to `store`."""
    with PartitionedTrainer(store, hyper, plan, staleness, prefetch, io_delay) as trainer:
        return trainer.train_epoch(epoch)
