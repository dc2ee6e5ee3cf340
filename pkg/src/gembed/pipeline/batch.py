"""
Batch forming shared by every trainer.

Edge order and negatives come from generators keyed by (seed, epoch, bucket, batch), so
the batches of an epoch do not depend on which worker forms them.
"""

import dataclasses
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import torch

from ..model.loss import GradientDelta, ScoringBatch
from ..model.sampling import DegreeTable, NodePool, sample_negatives
from .config import TrainingHyper
from .storage import NodeStore, RelationTable

SHUFFLE_STREAM = 4
BATCH_STREAM = 5


def epoch_permutation(num_edges: int, seed: int, epoch: int, bucket_key: int = 0) -> np.ndarray:
    rng = np.random.default_rng([seed, SHUFFLE_STREAM, epoch, bucket_key])
    return rng.permutation(num_edges)


def batch_rng(seed: int, epoch: int, bucket_key: int, batch_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, BATCH_STREAM, epoch, bucket_key, batch_index])


def batch_slices(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """Consecutive chunks of `order`; the last one may be short."""
    return [order[k:k + batch_size] for k in range(0, len(order), batch_size)]


@dataclass
class Batch:
    """
    One batch on its way through the pipeline.

    version is the number of retired batches when the node rows were gathered.
    """

    batch_id: int
    edges: np.ndarray
    node_ids: torch.Tensor
    node_emb: torch.Tensor
    rel_ids: torch.Tensor
    src: torch.Tensor
    rel: torch.Tensor
    dst: torch.Tensor
    neg_dst: torch.Tensor
    neg_src: torch.Tensor
    version: int = 0
    lag: int = 0
    loss: Optional[float] = None
    delta: Optional[GradientDelta] = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def seal(self) -> "Batch":
        """Copy of the batch whose gathered rows no longer alias loader buffers."""
        return dataclasses.replace(self, node_emb=self.node_emb.clone())

    def seal_delta(self) -> "Batch":
        delta = self.delta
        if delta is None:
            return self
        sealed = GradientDelta(delta.node_ids, delta.node_grad.clone(), delta.rel_ids, delta.rel_grad)
        return dataclasses.replace(self, delta=sealed)

    def scoring_batch(self, relations: RelationTable) -> ScoringBatch:
        return ScoringBatch(
            batch_id=self.batch_id,
            node_ids=self.node_ids,
            node_emb=self.node_emb,
            rel_ids=self.rel_ids,
            rel_emb=relations.gather(self.rel_ids),
            src=self.src,
            rel=self.rel,
            dst=self.dst,
            neg_dst=self.neg_dst,
            neg_src=self.neg_src,
        )


def form_batch(
    batch_id: int,
    edges: np.ndarray,
    nodes: NodeStore,
    hyper: TrainingHyper,
    degree_table: DegreeTable,
    pool: NodePool,
    rng: np.random.Generator,
    version: int = 0,
) -> Batch:
    """
    Sample both negative sets, deduplicate the node rows and gather them.

    Args:
        batch_id: Id carried into errors
        edges: Positive edges (src, rel, dst), global ids
        nodes: Store to gather from
        hyper: Negative count and degree fraction
        degree_table: Endpoints for degree-based negatives
        pool: Nodes negatives may be drawn from
        rng: Generator owned by this batch
        version: Retired-batch count at gather time
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    spec = hyper.negative_spec
    neg_dst = sample_negatives(spec, degree_table, pool, rng)
    neg_src = sample_negatives(spec, degree_table, pool, rng)

    num = len(edges)
    everything = np.concatenate([edges[:, 0], edges[:, 2], neg_dst, neg_src])
    node_ids, inverse = np.unique(everything, return_inverse=True)
    rel_ids, rel_inverse = np.unique(edges[:, 1], return_inverse=True)
    inverse = torch.from_numpy(inverse.reshape(-1).astype(np.int64))

    node_ids_t = torch.from_numpy(node_ids.astype(np.int64))
    return Batch(
        batch_id=batch_id,
        edges=edges,
        node_ids=node_ids_t,
        node_emb=nodes.gather(node_ids_t),
        rel_ids=torch.from_numpy(rel_ids.astype(np.int64)),
        src=inverse[:num],
        rel=torch.from_numpy(rel_inverse.reshape(-1).astype(np.int64)),
        dst=inverse[num:2 * num],
        neg_dst=inverse[2 * num:2 * num + len(neg_dst)],
        neg_src=inverse[2 * num + len(neg_dst):],
        version=version,
    )
