"""
gembed: single-machine, out-of-core training of multi-relation graph embeddings

Partitioned node embeddings live on disk; a bounded-staleness pipeline trains them
through a partition buffer driven by an edge-bucket ordering.
"""

__version__ = "0.1.0"
