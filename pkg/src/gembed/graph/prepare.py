"""
Turn an ingested graph into a partitioned on-disk dataset.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from .ingest import SPLIT_NAMES, IngestResult
from .partition import bucket_edges, partition_nodes
from .storage import GraphStore

logger = logging.getLogger(__name__)


def prepare_dataset(
    ingested: IngestResult,
    root: Union[str, Path],
    num_partitions: int,
    seed: int = 0,
    force: bool = False,
) -> GraphStore:
    """
    Partition nodes, relabel every split, bucket the train split and write it all.

    Node ids on disk are partition-contiguous; node_mapping.txt is written against the
    relabeled ids. Parameters are not initialized here.

    Args:
        ingested: Output of ingest() or ingest_presplit()
        root: Dataset directory
        num_partitions: Number of node partitions p
        seed: Partitioning seed
        force: Overwrite an existing dataset
    """
    meta = ingested.meta.with_partitions(num_partitions)
    assignment = partition_nodes(meta, num_partitions, seed)
    store = GraphStore.create(root, meta, force=force)

    buckets = bucket_edges(ingested.splits["train"], assignment)
    store.write_bucket_store(buckets)
    for split in SPLIT_NAMES:
        if split != "train":
            store.write_edges(split, assignment.relabel_edges(ingested.splits[split]))

    tokens = list(ingested.node_tokens)
    if tokens:
        relabeled = np.empty(len(tokens), dtype=object)
        relabeled[assignment.relabel] = tokens
        IngestResult(meta, {}, list(relabeled), list(ingested.relation_tokens)).save_mappings(store.root)
    logger.info(
        "prepared %d nodes, %d edges in %d partitions at %s",
        meta.num_nodes, meta.num_edges, num_partitions, store.root,
    )
    return store
