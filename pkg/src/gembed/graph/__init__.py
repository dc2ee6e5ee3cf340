"""
Graph store: ingestion, partitioning, edge buckets and on-disk formats.
"""

from .ingest import IngestResult, ingest, ingest_presplit, load_mapping
from .meta import EdgeBucketStore, GraphMeta, PartitionAssignment, uniform_offsets
from .partition import bucket_edges, node_degrees, partition_nodes
from .prepare import prepare_dataset
from .storage import DatasetLayout, GraphStore, PartitionBlock
from .synthetic import complete_bipartite_edges, generate_synthetic_graph, write_edge_list

__all__ = [
    "DatasetLayout",
    "EdgeBucketStore",
    "GraphMeta",
    "GraphStore",
    "IngestResult",
    "PartitionAssignment",
    "PartitionBlock",
    "bucket_edges",
    "complete_bipartite_edges",
    "generate_synthetic_graph",
    "ingest",
    "ingest_presplit",
    "load_mapping",
    "node_degrees",
    "partition_nodes",
    "prepare_dataset",
    "uniform_offsets",
    "write_edge_list",
]
