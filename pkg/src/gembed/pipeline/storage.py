"""
Parameter stores the trainers gather from and apply updates to.
"""

import threading
import time
from abc import ABC, abstractmethod
from typing import List, Optional, Tuple

import numpy as np
import torch

from ..graph.storage import GraphStore, PartitionBlock
from ..model.optimizer import Adagrad
from ..model.sampling import DegreeTable, NodePool


class NodeStore(ABC):
    """
    Node parameters addressed by global node id.

    gather() copies rows out; apply() runs Adagrad on rows in place. Both take the store
    lock, so a row update is atomic with respect to gathers.
    """

    def __init__(self) -> None:
        self.lock = threading.Lock()

    @property
    @abstractmethod
    def pool(self) -> NodePool:
        ...

    @abstractmethod
    def _segments(self) -> List[Tuple[int, PartitionBlock]]:
        """(first global id, block) for every block the store covers."""

    def _locate(self, ids: torch.Tensor):
        for start, block in self._segments():
            mask = (ids >= start) & (ids < start + block.rows)
            if bool(mask.any()):
                yield mask, start, block

    def _check_covered(self, ids: torch.Tensor) -> None:
        covered = torch.zeros(ids.shape, dtype=torch.bool)
        for start, block in self._segments():
            covered |= (ids >= start) & (ids < start + block.rows)
        if not bool(covered.all()):
            missing = int(ids[~covered][0])
            raise KeyError(f"node {missing} is not held by this store")

    def gather(self, ids: torch.Tensor) -> torch.Tensor:
        ids = torch.as_tensor(ids, dtype=torch.int64)
        self._check_covered(ids)
        segments = self._segments()
        dim = segments[0][1].dim
        out = torch.empty(ids.numel(), dim, dtype=segments[0][1].params.dtype)
        with self.lock:
            for mask, start, block in self._locate(ids):
                out[mask] = block.params.index_select(0, ids[mask] - start)
        return out

    def apply(self, ids: torch.Tensor, grad: torch.Tensor, optimizer: Adagrad) -> None:
        ids = torch.as_tensor(ids, dtype=torch.int64)
        with self.lock:
            for mask, start, block in self._locate(ids):
                optimizer.step(block.params, block.state, ids[mask] - start, grad[mask])


class InMemoryNodeStore(NodeStore):
    """
    Every node row in one block.

    Args:
        block: Parameters and Adagrad state of all nodes
        gather_delay: Seconds slept per gather (stands in for slow storage in tests)
    """

    def __init__(self, block: PartitionBlock, gather_delay: float = 0.0):
        super().__init__()
        self.block = block
        self.gather_delay = gather_delay

    @property
    def num_nodes(self) -> int:
        return self.block.rows

    @property
    def pool(self) -> NodePool:
        return NodePool.full(self.block.rows)

    def _segments(self) -> List[Tuple[int, PartitionBlock]]:
        return [(0, self.block)]

    def gather(self, ids: torch.Tensor) -> torch.Tensor:
        if self.gather_delay:
            time.sleep(self.gather_delay)
        return super().gather(ids)


class PairNodeStore(NodeStore):
    """The two resident partitions of a bucket viewed as one store."""

    def __init__(self, offsets: np.ndarray, i: int, block_i: PartitionBlock, j: int, block_j: PartitionBlock):
        super().__init__()
        self._parts = [(int(offsets[i]), block_i)]
        if j != i:
            self._parts.append((int(offsets[j]), block_j))

    @property
    def pool(self) -> NodePool:
        return NodePool([(start, start + block.rows) for start, block in self._parts])

    def _segments(self) -> List[Tuple[int, PartitionBlock]]:
        return self._parts


class RelationTable:
    """Relation parameters; only the compute stage writes them."""

    def __init__(self, block: PartitionBlock):
        self.block = block
        self.updates = 0

    @property
    def num_relations(self) -> int:
        return self.block.rows

    def gather(self, ids: torch.Tensor) -> torch.Tensor:
        return self.block.params.index_select(0, ids)

    def apply(self, ids: torch.Tensor, grad: torch.Tensor, optimizer: Adagrad) -> int:
        """Update rows in place; returns the sequence number of this update."""
        optimizer.step(self.block.params, self.block.state, ids, grad)
        self.updates += 1
        return self.updates


class InMemoryStorage:
    """All parameters and the train split held in memory."""

    def __init__(
        self,
        nodes: InMemoryNodeStore,
        relations: RelationTable,
        train_edges: np.ndarray,
        degree_table: Optional[DegreeTable] = None,
    ):
        self.nodes = nodes
        self.relations = relations
        self.train_edges = np.asarray(train_edges, dtype=np.int64).reshape(-1, 3)
        self.degree_table = degree_table if degree_table is not None else DegreeTable.from_edges(self.train_edges)

    @classmethod
    def from_graph_store(cls, store: GraphStore, gather_delay: float = 0.0) -> "InMemoryStorage":
        return cls(
            InMemoryNodeStore(store.read_all_nodes(), gather_delay),
            RelationTable(store.read_relations()),
            store.read_edges("train"),
        )

    def save(self, store: GraphStore) -> None:
        """Split node rows back into partition files and write the relation table."""
        offsets = store.meta.partition_offsets
        block = self.nodes.block
        for k in range(store.meta.num_partitions):
            a, b = int(offsets[k]), int(offsets[k + 1])
            store.write_partition(k, PartitionBlock(k, block.params[a:b].clone(), block.state[a:b].clone()))
        store.write_relations(self.relations.block)
