"""
Uniform node partitioning and edge bucketing.
"""

import logging

import numpy as np

from ..utils.errors import GraphFormatError
from .meta import EdgeBucketStore, GraphMeta, PartitionAssignment, uniform_offsets

logger = logging.getLogger(__name__)


def partition_nodes(meta: GraphMeta, num_partitions: int, seed: int = 0) -> PartitionAssignment:
    """
    Randomly permute node ids (seeded) and cut them into near-equal contiguous ranges.

    Args:
        meta: Graph metadata (num_nodes is used)
        num_partitions: Number of partitions p, 1 <= p <= |V|
        seed: Permutation seed

    Returns:
        PartitionAssignment mapping every original id to its new, partition-contiguous id
    """
    if num_partitions < 1:
        raise ValueError(f"num_partitions must be >= 1, got {num_partitions}")
    if num_partitions > meta.num_nodes:
        raise ValueError(
            f"cannot split {meta.num_nodes} nodes into {num_partitions} partitions"
        )

    if num_partitions == 1:
        relabel = np.arange(meta.num_nodes, dtype=np.int64)
    else:
        rng = np.random.default_rng([seed, 1])
        # new_order[k] is the old id placed at row k
        new_order = rng.permutation(meta.num_nodes)
        relabel = np.empty(meta.num_nodes, dtype=np.int64)
        relabel[new_order] = np.arange(meta.num_nodes, dtype=np.int64)

    offsets = uniform_offsets(meta.num_nodes, num_partitions)
    logger.debug("partitioned %d nodes into %d parts", meta.num_nodes, num_partitions)
    return PartitionAssignment(relabel=relabel, partition_offsets=offsets)


def bucket_edges(train_edges: np.ndarray, assignment: PartitionAssignment) -> EdgeBucketStore:
    """
    Relabel training edges and group them into p*p buckets by (partition(src), partition(dst)).

    Edge order inside a bucket follows the input order.
    """
    relabeled = assignment.relabel_edges(train_edges)
    p = assignment.num_partitions

    src_part = assignment.partition_of(relabeled[:, 0])
    dst_part = assignment.partition_of(relabeled[:, 2])
    bucket_ids = src_part * p + dst_part

    order = np.argsort(bucket_ids, kind="stable")
    counts = np.bincount(bucket_ids, minlength=p * p)
    offsets = np.zeros(p * p + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])

    store = EdgeBucketStore(edges=relabeled[order], offsets=offsets, num_partitions=p)
    if len(store) != len(relabeled):
        raise GraphFormatError("bucketing lost edges")
    return store


def node_degrees(edges: np.ndarray, num_nodes: int) -> np.ndarray:
    """Total degree (in + out) of every node over the given edges."""
    edges = np.asarray(edges).reshape(-1, 3)
    endpoints = np.concatenate([edges[:, 0], edges[:, 2]]).astype(np.int64)
    return np.bincount(endpoints, minlength=num_nodes)
