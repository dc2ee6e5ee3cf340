"""
Graph metadata and the in-memory shapes of a partitioned graph.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..utils.errors import GraphFormatError

# float32 parameters plus float32 Adagrad state
BYTES_PER_VALUE = 4
ARRAYS_PER_PARTITION = 2


def uniform_offsets(num_nodes: int, num_partitions: int) -> np.ndarray:
    """Start row of every partition plus the end sentinel; sizes differ by at most one."""
    base, rem = divmod(num_nodes, num_partitions)
    k = np.arange(num_partitions + 1, dtype=np.int64)
    return k * base + np.minimum(k, rem)


class GraphMeta(BaseModel):
    """Counts describing a preprocessed graph; persisted as meta.json."""

    model_config = ConfigDict(frozen=True)

    num_nodes: int = Field(ge=1)
    num_relations: int = Field(ge=1)
    num_edges: int = Field(ge=0)
    num_partitions: int = Field(default=1, ge=1)
    embedding_dim: int = Field(default=100, ge=1)
    split_sizes: Tuple[int, int, int]

    @model_validator(mode="after")
    def _check_counts(self) -> "GraphMeta":
        if any(s < 0 for s in self.split_sizes):
            raise ValueError(f"negative split size in {self.split_sizes}")
        if sum(self.split_sizes) != self.num_edges:
            raise ValueError(
                f"split sizes {self.split_sizes} do not sum to num_edges={self.num_edges}"
            )
        if self.num_partitions > self.num_nodes:
            raise ValueError(
                f"num_partitions={self.num_partitions} exceeds num_nodes={self.num_nodes}"
            )
        return self

    @property
    def num_train(self) -> int:
        return self.split_sizes[0]

    @property
    def partition_offsets(self) -> np.ndarray:
        return uniform_offsets(self.num_nodes, self.num_partitions)

    def partition_range(self, partition_id: int) -> Tuple[int, int]:
        if not 0 <= partition_id < self.num_partitions:
            raise IndexError(f"partition {partition_id} out of range [0, {self.num_partitions})")
        offsets = self.partition_offsets
        return int(offsets[partition_id]), int(offsets[partition_id + 1])

    def partition_rows(self, partition_id: int) -> int:
        start, end = self.partition_range(partition_id)
        return end - start

    def partition_bytes(self, partition_id: int) -> int:
        return self.partition_rows(partition_id) * self.embedding_dim * BYTES_PER_VALUE * ARRAYS_PER_PARTITION

    def max_partition_bytes(self) -> int:
        return self.partition_bytes(0)

    def total_node_bytes(self) -> int:
        return self.num_nodes * self.embedding_dim * BYTES_PER_VALUE * ARRAYS_PER_PARTITION

    def relation_bytes(self) -> int:
        return self.num_relations * self.embedding_dim * BYTES_PER_VALUE * ARRAYS_PER_PARTITION

    def partition_of(self, node_ids: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.partition_offsets, node_ids, side="right") - 1

    def with_partitions(self, num_partitions: int) -> "GraphMeta":
        return self.model_copy(update={"num_partitions": num_partitions})


@dataclass
class PartitionAssignment:
    """
    Node relabeling produced by uniform partitioning.

    Attributes:
        relabel: relabel[old_id] is the node's new id; new ids of partition k are contiguous
        partition_offsets: start row of each partition plus end sentinel (p + 1 entries)
    """

    relabel: np.ndarray
    partition_offsets: np.ndarray

    @property
    def num_partitions(self) -> int:
        return len(self.partition_offsets) - 1

    @property
    def num_nodes(self) -> int:
        return len(self.relabel)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.partition_offsets)

    @property
    def node_to_partition(self) -> np.ndarray:
        """Partition of every original node id."""
        return self.partition_of(self.relabel)

    def partition_of(self, new_ids: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.partition_offsets, new_ids, side="right") - 1

    def relabel_edges(self, edges: np.ndarray) -> np.ndarray:
        """Map (src, rel, dst) triples from original ids to partition-contiguous ids."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
        if len(edges):
            endpoints = edges[:, [0, 2]]
            bad = (endpoints < 0) | (endpoints >= self.num_nodes)
            if bad.any():
                node = int(endpoints[bad][0])
                raise GraphFormatError(f"edge endpoint {node} has no partition assignment")
        out = edges.copy()
        out[:, 0] = self.relabel[edges[:, 0]]
        out[:, 2] = self.relabel[edges[:, 2]]
        return out


@dataclass
class EdgeBucketStore:
    """
    Training edges sorted by bucket with a p*p + 1 offset index.

    Bucket (i, j) holds edges whose source lies in partition i and destination in partition j.
    """

    edges: np.ndarray
    offsets: np.ndarray
    num_partitions: int

    def __post_init__(self) -> None:
        expected = self.num_partitions * self.num_partitions + 1
        if len(self.offsets) != expected:
            raise GraphFormatError(f"expected {expected} bucket offsets, got {len(self.offsets)}")
        if int(self.offsets[-1]) != len(self.edges):
            raise GraphFormatError(
                f"bucket offsets end at {int(self.offsets[-1])} but there are {len(self.edges)} edges"
            )

    def __len__(self) -> int:
        return len(self.edges)

    def bucket_index(self, i: int, j: int) -> int:
        return i * self.num_partitions + j

    def bucket(self, i: int, j: int) -> np.ndarray:
        k = self.bucket_index(i, j)
        return self.edges[int(self.offsets[k]):int(self.offsets[k + 1])]

    def bucket_size(self, i: int, j: int) -> int:
        k = self.bucket_index(i, j)
        return int(self.offsets[k + 1] - self.offsets[k])

    def bucket_sizes(self) -> np.ndarray:
        return np.diff(self.offsets).reshape(self.num_partitions, self.num_partitions)
