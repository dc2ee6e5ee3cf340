"""
Parameter initialization.
"""

import logging
import math
from typing import List, Tuple

import numpy as np
import torch

from ..graph.meta import GraphMeta
from ..graph.storage import GraphStore, PartitionBlock

logger = logging.getLogger(__name__)

_NODE_STREAM = 2
_RELATION_STREAM = 3


def init_scale(embedding_dim: int) -> float:
    return 1.0 / math.sqrt(embedding_dim)


def init_block(block_id: int, rows: int, embedding_dim: int, rng: np.random.Generator) -> PartitionBlock:
    """Uniform parameters in [-1/sqrt(d), 1/sqrt(d)] and a zero accumulator."""
    a = init_scale(embedding_dim)
    values = rng.uniform(-a, a, size=(rows, embedding_dim)).astype(np.float32)
    params = torch.from_numpy(values)
    return PartitionBlock(block_id, params, torch.zeros_like(params))


def init_partition(meta: GraphMeta, partition_id: int, seed: int) -> PartitionBlock:
    rng = np.random.default_rng([seed, _NODE_STREAM, partition_id])
    return init_block(partition_id, meta.partition_rows(partition_id), meta.embedding_dim, rng)


def init_relations(meta: GraphMeta, seed: int) -> PartitionBlock:
    rng = np.random.default_rng([seed, _RELATION_STREAM])
    return init_block(-1, meta.num_relations, meta.embedding_dim, rng)


def init_embeddings(meta: GraphMeta, seed: int) -> Tuple[List[PartitionBlock], PartitionBlock]:
    """Initialize every node partition and the relation table in memory."""
    parts = [init_partition(meta, k, seed) for k in range(meta.num_partitions)]
    return parts, init_relations(meta, seed)


def write_initial_embeddings(store: GraphStore, seed: int) -> None:
    """Initialize and write one partition at a time, then the relation table."""
    meta = store.meta
    for k in range(meta.num_partitions):
        store.write_partition(k, init_partition(meta, k, seed))
    store.write_relations(init_relations(meta, seed))
    logger.info(
        "initialized %d node partitions and %d relations (d=%d, seed=%d)",
        meta.num_partitions, meta.num_relations, meta.embedding_dim, seed,
    )
