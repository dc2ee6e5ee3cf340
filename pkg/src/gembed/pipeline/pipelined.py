"""
Bounded-staleness training pipeline.

Five stages connected by bounded queues:

    load -> transfer_in -> compute -> transfer_out -> update

A feeder hands out at most `bound` tokens in batch order; a token comes back when the
batch's node updates are applied. Compute is a single worker that sees batches in
admission order and owns the relation parameters, so relation updates are never stale.
Node rows a batch gathered may miss the updates of at most bound - 1 earlier batches.
"""

import logging
import queue
import threading
import time
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..model.loss import loss_and_grad
from ..model.sampling import DegreeTable, NodePool
from ..utils.errors import PipelineError
from .batch import Batch, batch_rng, batch_slices, epoch_permutation, form_batch
from .config import StalenessConfig, TrainingHyper
from .occupancy import OccupancyRecorder
from .stats import EpochStats
from .storage import InMemoryStorage, NodeStore, RelationTable

logger = logging.getLogger(__name__)

POLL_SECONDS = 0.05
_STOP = object()


class _Aborted(Exception):
    pass


class _Run:
    """State of one pass over a set of edges."""

    def __init__(self, num_batches: int, bound: int, capacity: int, recorder: OccupancyRecorder):
        self.num_batches = num_batches
        self.recorder = recorder
        self.tokens = threading.Semaphore(bound)
        self.abort = threading.Event()
        self.errors: List[Tuple[str, BaseException]] = []
        self.lock = threading.Lock()
        self.retired = 0
        self.rows_in_flight = 0
        self.queues = {
            "transfer_in": queue.Queue(capacity),
            "compute": queue.Queue(capacity),
            "transfer_out": queue.Queue(capacity),
            "update": queue.Queue(capacity),
        }
        self.queues["load"] = queue.Queue(capacity + 1)

    def put(self, stage: str, item) -> None:
        q = self.queues[stage]
        while True:
            if self.abort.is_set():
                raise _Aborted()
            try:
                q.put(item, timeout=POLL_SECONDS)
            except queue.Full:
                continue
            self.recorder.sample_queue(stage, q.qsize())
            return

    def get(self, stage: str):
        q = self.queues[stage]
        while True:
            if self.abort.is_set():
                raise _Aborted()
            try:
                return q.get(timeout=POLL_SECONDS)
            except queue.Empty:
                continue

    def acquire_token(self) -> None:
        while not self.tokens.acquire(timeout=POLL_SECONDS):
            if self.abort.is_set():
                raise _Aborted()

    def fail(self, stage: str, error: BaseException) -> None:
        with self.lock:
            self.errors.append((stage, error))
        self.abort.set()


class StalenessPipeline:
    """
    Runs batches through the staged pipeline.

    Args:
        hyper: Model and optimizer settings
        staleness: Bound and worker counts
        recorder: Occupancy instrumentation shared across runs
        progress: Anything with update(n), e.g. a tqdm bar
    """

    def __init__(
        self,
        hyper: TrainingHyper,
        staleness: StalenessConfig,
        recorder: Optional[OccupancyRecorder] = None,
        progress=None,
    ):
        self.hyper = hyper
        self.staleness = staleness
        self.recorder = recorder if recorder is not None else OccupancyRecorder()
        self.recorder.set_workers("load", staleness.loader_workers)
        self.recorder.set_workers("update", staleness.update_workers)
        self.progress = progress

    def run(
        self,
        nodes: NodeStore,
        relations: RelationTable,
        edges: np.ndarray,
        degree_table: DegreeTable,
        pool: NodePool,
        epoch: int,
        stats: EpochStats,
        bucket_key: int = 0,
    ) -> None:
        """Train on `edges` once. Raises PipelineError if any stage fails."""
        hyper = self.hyper
        optimizer = hyper.optimizer
        order = epoch_permutation(len(edges), hyper.seed, epoch, bucket_key)
        chunks = batch_slices(order, hyper.batch_size)
        if not chunks:
            return
        run = _Run(len(chunks), self.staleness.bound, self.staleness.capacity, self.recorder)
        first_id = stats.num_batches
        recorder = self.recorder

        def feeder() -> None:
            for k, chunk in enumerate(chunks):
                run.acquire_token()
                with run.lock:
                    run.rows_in_flight += 2 * len(chunk)
                    rows = run.rows_in_flight
                stats.note_rows_in_flight(rows)
                run.put("load", k)
            for _ in range(self.staleness.loader_workers):
                run.put("load", _STOP)

        def loader() -> None:
            while True:
                k = run.get("load")
                if k is _STOP:
                    return
                with recorder.busy("load"):
                    with run.lock:
                        version = run.retired
                    batch = form_batch(
                        first_id + k, edges[chunks[k]], nodes, hyper, degree_table, pool,
                        batch_rng(hyper.seed, epoch, bucket_key, k), version,
                    )
                run.put("transfer_in", (k, batch))

        def transfer_in() -> None:
            pending = {}
            next_k = 0
            while next_k < run.num_batches:
                k, batch = run.get("transfer_in")
                pending[k] = batch
                while next_k in pending:
                    with recorder.busy("transfer_in"):
                        sealed = pending.pop(next_k).seal()
                    run.put("compute", sealed)
                    next_k += 1

        def compute() -> None:
            for _ in range(run.num_batches):
                batch: Batch = run.get("compute")
                with recorder.busy("compute"):
                    with run.lock:
                        batch.lag = run.retired - batch.version
                    loss, delta = loss_and_grad(hyper.kind, batch.scoring_batch(relations))
                    sequence = relations.apply(delta.rel_ids, delta.rel_grad, optimizer)
                    batch.loss = loss
                    batch.delta = delta
                stats.record_batch(batch.num_edges, loss, batch.lag, sequence)
                if self.progress is not None:
                    self.progress.update(1)
                run.put("transfer_out", batch)

        def transfer_out() -> None:
            for _ in range(run.num_batches):
                batch = run.get("transfer_out")
                with recorder.busy("transfer_out"):
                    sealed = batch.seal_delta()
                run.put("update", sealed)
            for _ in range(self.staleness.update_workers):
                run.put("update", _STOP)

        def updater() -> None:
            while True:
                batch = run.get("update")
                if batch is _STOP:
                    return
                with recorder.busy("update"):
                    delta = batch.delta
                    nodes.apply(delta.node_ids, delta.node_grad, optimizer)
                with run.lock:
                    run.retired += 1
                    run.rows_in_flight -= 2 * batch.num_edges
                run.tokens.release()

        workers: List[Tuple[str, Callable[[], None]]] = [("feeder", feeder)]
        workers += [("load", loader)] * self.staleness.loader_workers
        workers += [("transfer_in", transfer_in), ("compute", compute), ("transfer_out", transfer_out)]
        workers += [("update", updater)] * self.staleness.update_workers

        def guarded(stage: str, body: Callable[[], None]) -> Callable[[], None]:
            def target() -> None:
                try:
                    body()
                except _Aborted:
                    pass
                except BaseException as e:
                    logger.error("stage %s failed: %s", stage, e)
                    run.fail(stage, e)
            return target

        threads = [
            threading.Thread(target=guarded(stage, body), name=f"gembed-{stage}-{n}", daemon=True)
            for n, (stage, body) in enumerate(workers)
        ]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

        if run.errors:
            stage, error = run.errors[0]
            raise PipelineError(stage, error) from error


def train_epoch_pipelined(
    storage: InMemoryStorage,
    hyper: TrainingHyper,
    staleness: StalenessConfig,
    epoch: int = 0,
    recorder: Optional[OccupancyRecorder] = None,
    progress=None,
) -> EpochStats:
    pipeline = StalenessPipeline(hyper, staleness, recorder, progress)
    stats = EpochStats(epoch, mode="pipelined")
    start = time.perf_counter()
    pipeline.recorder.start()
    try:
        pipeline.run(
            storage.nodes, storage.relations, storage.train_edges, storage.degree_table,
            storage.nodes.pool, epoch, stats,
        )
    finally:
        pipeline.recorder.stop()
    stats.seconds = time.perf_counter() - start
    stats.busy_fraction = pipeline.recorder.report().busy_fraction
    logger.info(
        "epoch %d: %d edges, mean loss %.4f, max staleness %d",
        epoch, stats.num_edges, stats.mean_loss, stats.max_staleness,
    )
    return stats
