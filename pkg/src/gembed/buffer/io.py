"""
Partition IO backends used by the buffer.
"""

import threading
import time
from abc import ABC, abstractmethod
from typing import Dict, Iterable, Optional

from ..graph.storage import GraphStore, PartitionBlock
from ..utils.errors import PartitionIOError


class PartitionIO(ABC):
    """
    Reads and writes whole node partitions.

    Args:
        io_delay: Seconds slept before every read and write (throttling hook for tests)
    """

    def __init__(self, io_delay: float = 0.0):
        self.io_delay = io_delay

    @property
    @abstractmethod
    def num_partitions(self) -> int:
        ...

    @abstractmethod
    def partition_bytes(self, partition_id: int) -> int:
        ...

    @abstractmethod
    def _read(self, partition_id: int) -> PartitionBlock:
        ...

    @abstractmethod
    def _write(self, partition_id: int, block: PartitionBlock) -> None:
        ...

    def read(self, partition_id: int) -> PartitionBlock:
        if self.io_delay:
            time.sleep(self.io_delay)
        try:
            return self._read(partition_id)
        except PartitionIOError:
            raise
        except Exception as e:
            raise PartitionIOError(partition_id, e) from e

    def write(self, partition_id: int, block: PartitionBlock) -> None:
        if self.io_delay:
            time.sleep(self.io_delay)
        try:
            self._write(partition_id, block)
        except PartitionIOError:
            raise
        except Exception as e:
            raise PartitionIOError(partition_id, e) from e


class DiskPartitionIO(PartitionIO):
    """Partition files of a dataset directory."""

    def __init__(self, store: GraphStore, io_delay: float = 0.0):
        super().__init__(io_delay)
        self.store = store

    @property
    def num_partitions(self) -> int:
        return self.store.meta.num_partitions

    def partition_bytes(self, partition_id: int) -> int:
        return self.store.meta.partition_bytes(partition_id)

    def _read(self, partition_id: int) -> PartitionBlock:
        return self.store.read_partition(partition_id)

    def _write(self, partition_id: int, block: PartitionBlock) -> None:
        self.store.write_partition(partition_id, block)


class MemoryPartitionIO(PartitionIO):
    """Partitions kept in a dict; reads and writes copy, like a disk would."""

    def __init__(self, blocks: Iterable[PartitionBlock], io_delay: float = 0.0,
                 fail_on_read: Optional[int] = None):
        super().__init__(io_delay)
        self._blocks: Dict[int, PartitionBlock] = {b.partition_id: b.clone() for b in blocks}
        self._lock = threading.Lock()
        self.fail_on_read = fail_on_read

    @property
    def num_partitions(self) -> int:
        return len(self._blocks)

    def partition_bytes(self, partition_id: int) -> int:
        return self._blocks[partition_id].nbytes

    def _read(self, partition_id: int) -> PartitionBlock:
        if self.fail_on_read == partition_id:
            raise OSError(f"injected read failure on partition {partition_id}")
        with self._lock:
            return self._blocks[partition_id].clone()

    def _write(self, partition_id: int, block: PartitionBlock) -> None:
        with self._lock:
            self._blocks[partition_id] = block.clone()

    def snapshot(self, partition_id: int) -> PartitionBlock:
        with self._lock:
            return self._blocks[partition_id].clone()
