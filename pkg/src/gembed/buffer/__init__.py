"""
Partition buffer with furthest-next-use eviction, prefetching and async writeback.
"""

from .io import DiskPartitionIO, MemoryPartitionIO, PartitionIO
from .partition_buffer import BufferStats, PartitionBuffer

__all__ = [
    "BufferStats",
    "DiskPartitionIO",
    "MemoryPartitionIO",
    "PartitionBuffer",
    "PartitionIO",
]
