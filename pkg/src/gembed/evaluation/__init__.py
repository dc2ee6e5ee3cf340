"""
Link-prediction evaluation: ranks, MRR, Hits@k, filtered and unfiltered protocols.
"""

from .evaluate import EvalSpec, eval_negatives, evaluate_edges, evaluate_split, gather_node_rows, load_true_triples
from .metrics import DEFAULT_K, EvalReport, aggregate, rank_histogram
from .ranking import SIDES, EmbeddingTable, TrueTripleIndex, rank_batch, rank_both_sides, rank_edge

__all__ = [
    "DEFAULT_K",
    "SIDES",
    "EmbeddingTable",
    "EvalReport",
    "EvalSpec",
    "TrueTripleIndex",
    "aggregate",
    "eval_negatives",
    "evaluate_edges",
    "evaluate_split",
    "gather_node_rows",
    "load_true_triples",
    "rank_batch",
    "rank_both_sides",
    "rank_edge",
    "rank_histogram",
]
