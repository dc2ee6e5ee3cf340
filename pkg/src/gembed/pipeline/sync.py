"""
Synchronous trainer: form, score, update, one batch at a time.
"""

import logging
import time
from typing import Optional

import numpy as np

from ..model.loss import loss_and_grad
from ..model.sampling import DegreeTable, NodePool
from .batch import batch_rng, batch_slices, epoch_permutation, form_batch
from .config import TrainingHyper
from .occupancy import OccupancyRecorder
from .stats import EpochStats
from .storage import InMemoryStorage, NodeStore, RelationTable

logger = logging.getLogger(__name__)


def run_batches_sync(
    nodes: NodeStore,
    relations: RelationTable,
    edges: np.ndarray,
    degree_table: DegreeTable,
    pool: NodePool,
    hyper: TrainingHyper,
    epoch: int,
    stats: EpochStats,
    bucket_key: int = 0,
    recorder: Optional[OccupancyRecorder] = None,
    progress=None,
) -> None:
    """Train on `edges` once; every batch sees the updates of all earlier batches."""
    recorder = recorder if recorder is not None else OccupancyRecorder()
    optimizer = hyper.optimizer
    order = epoch_permutation(len(edges), hyper.seed, epoch, bucket_key)
    for k, chunk in enumerate(batch_slices(order, hyper.batch_size)):
        batch_id = stats.num_batches
        with recorder.busy("load"):
            batch = form_batch(
                batch_id, edges[chunk], nodes, hyper, degree_table, pool,
                batch_rng(hyper.seed, epoch, bucket_key, k),
            )
        with recorder.busy("compute"):
            loss, delta = loss_and_grad(hyper.kind, batch.scoring_batch(relations))
            sequence = relations.apply(delta.rel_ids, delta.rel_grad, optimizer)
        with recorder.busy("update"):
            nodes.apply(delta.node_ids, delta.node_grad, optimizer)
        stats.note_rows_in_flight(2 * batch.num_edges)
        stats.record_batch(batch.num_edges, loss, 0, sequence)
        if progress is not None:
            progress.update(1)


def train_epoch_sync(
    storage: InMemoryStorage,
    hyper: TrainingHyper,
    epoch: int = 0,
    recorder: Optional[OccupancyRecorder] = None,
    progress=None,
) -> EpochStats:
    recorder = recorder if recorder is not None else OccupancyRecorder()
    stats = EpochStats(epoch, mode="sync")
    start = time.perf_counter()
    recorder.start()
    run_batches_sync(
        storage.nodes, storage.relations, storage.train_edges, storage.degree_table,
        storage.nodes.pool, hyper, epoch, stats, recorder=recorder, progress=progress,
    )
    recorder.stop()
    stats.seconds = time.perf_counter() - start
    stats.busy_fraction = recorder.report().busy_fraction
    logger.info("epoch %d: %d edges, mean loss %.4f", epoch, stats.num_edges, stats.mean_loss)
    return stats
