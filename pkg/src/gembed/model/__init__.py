"""
Embedding model: score functions, loss and gradients, negative sampling, Adagrad, initialization.
"""

from .init import init_block, init_embeddings, init_partition, init_relations, init_scale, write_initial_embeddings
from .loss import GradientDelta, ScoringBatch, loss_and_grad
from .optimizer import Adagrad, adagrad_step
from .sampling import DegreeTable, NegativeSampleSpec, NodePool, sample_negatives
from .scoring import ModelKind, check_dim, dst_query, rel_grad, score, src_query

__all__ = [
    "Adagrad",
    "DegreeTable",
    "GradientDelta",
    "ModelKind",
    "NegativeSampleSpec",
    "NodePool",
    "ScoringBatch",
    "adagrad_step",
    "check_dim",
    "dst_query",
    "init_block",
    "init_embeddings",
    "init_partition",
    "init_relations",
    "init_scale",
    "loss_and_grad",
    "rel_grad",
    "sample_negatives",
    "score",
    "src_query",
    "write_initial_embeddings",
]
