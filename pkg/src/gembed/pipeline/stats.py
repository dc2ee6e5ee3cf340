"""
Per-epoch training statistics.
"""

import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..buffer.partition_buffer import BufferStats

BUFFER_FIELDS = ("reads", "writes", "misses", "stall_seconds", "bytes_read", "bytes_written")


@dataclass
class EpochStats:
    epoch: int
    mode: str = "in_memory"
    num_edges: int = 0
    num_batches: int = 0
    loss_sum: float = 0.0
    seconds: float = 0.0
    max_staleness: int = 0
    relation_updates: int = 0
    peak_rows_in_flight: int = 0
    batch_losses: List[float] = field(default_factory=list)
    buffer: Dict[str, float] = field(default_factory=dict)
    busy_fraction: Dict[str, float] = field(default_factory=dict)
    valid_mrr: Optional[float] = None

    def __post_init__(self) -> None:
        self._lock = threading.Lock()

    def record_batch(self, num_edges: int, loss: float, lag: int, sequence: int) -> None:
        with self._lock:
            self.num_edges += num_edges
            self.num_batches += 1
            self.loss_sum += loss * num_edges
            self.batch_losses.append(loss)
            self.max_staleness = max(self.max_staleness, lag)
            self.relation_updates = max(self.relation_updates, sequence)

    def note_rows_in_flight(self, rows: int) -> None:
        with self._lock:
            self.peak_rows_in_flight = max(self.peak_rows_in_flight, rows)

    def set_buffer_delta(self, before: Dict[str, float], after: BufferStats) -> None:
        now = after.as_dict()
        self.buffer = {name: now[name] - before.get(name, 0) for name in BUFFER_FIELDS}

    @property
    def mean_loss(self) -> float:
        return self.loss_sum / self.num_edges if self.num_edges else 0.0

    @property
    def edges_per_second(self) -> float:
        return self.num_edges / self.seconds if self.seconds > 0 else 0.0

    def as_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {
            "epoch": self.epoch,
            "mode": self.mode,
            "edges": self.num_edges,
            "batches": self.num_batches,
            "mean_loss": self.mean_loss,
            "seconds": self.seconds,
            "edges_per_sec": self.edges_per_second,
            "max_staleness": self.max_staleness,
            "peak_rows_in_flight": self.peak_rows_in_flight,
        }
        for name in BUFFER_FIELDS:
            row[f"buffer_{name}"] = self.buffer.get(name, 0)
        for stage, fraction in sorted(self.busy_fraction.items()):
            row[f"busy_{stage}"] = fraction
        row["valid_mrr"] = self.valid_mrr if self.valid_mrr is not None else ""
        return row
