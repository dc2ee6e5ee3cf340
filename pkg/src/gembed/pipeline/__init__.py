"""
Trainers: synchronous, bounded-staleness pipelined, and partitioned out-of-core.
"""

from .batch import Batch, batch_rng, batch_slices, epoch_permutation, form_batch
from .config import StalenessConfig, TrainingHyper
from .occupancy import STAGES, TIMELINE_COLUMNS, OccupancyRecorder, OccupancyReport, occupancy_report
from .partitioned import PartitionedTrainer, train_epoch_partitioned
from .pipelined import StalenessPipeline, train_epoch_pipelined
from .stats import EpochStats
from .storage import InMemoryNodeStore, InMemoryStorage, NodeStore, PairNodeStore, RelationTable
from .sync import run_batches_sync, train_epoch_sync

__all__ = [
    "STAGES",
    "TIMELINE_COLUMNS",
    "Batch",
    "EpochStats",
    "InMemoryNodeStore",
    "InMemoryStorage",
    "NodeStore",
    "OccupancyRecorder",
    "OccupancyReport",
    "PairNodeStore",
    "PartitionedTrainer",
    "RelationTable",
    "StalenessConfig",
    "StalenessPipeline",
    "TrainingHyper",
    "batch_rng",
    "batch_slices",
    "epoch_permutation",
    "form_batch",
    "occupancy_report",
    "run_batches_sync",
    "train_epoch_partitioned",
    "train_epoch_pipelined",
    "train_epoch_sync",
]
