"""
Softmax cross-entropy over shared negatives, with analytic gradients.
"""

from dataclasses import dataclass
from typing import Tuple

import torch

from ..utils.errors import NonFiniteScoreError
from .scoring import ModelKind, dst_query, rel_grad, src_query


@dataclass
class ScoringBatch:
    """
    Gathered parameters of one batch.

    Node and relation rows are unique; positives and negatives refer to them by local index.

    Attributes:
        batch_id: Id carried into errors
        node_ids: Global ids of the gathered node rows, shape (k,)
        node_emb: Node parameters, shape (k, d)
        rel_ids: Global ids of the gathered relation rows, shape (m,)
        rel_emb: Relation parameters, shape (m, d)
        src, rel, dst: Local indices of the positive edges, shape (B,)
        neg_dst: Local node indices corrupting destinations, shape (n,)
        neg_src: Local node indices corrupting sources, shape (n',)
    """

    batch_id: int
    node_ids: torch.Tensor
    node_emb: torch.Tensor
    rel_ids: torch.Tensor
    rel_emb: torch.Tensor
    src: torch.Tensor
    rel: torch.Tensor
    dst: torch.Tensor
    neg_dst: torch.Tensor
    neg_src: torch.Tensor

    @property
    def num_positives(self) -> int:
        return int(self.src.shape[0])


@dataclass
class GradientDelta:
    """Per-row gradients for the node and relation rows of one batch."""

    node_ids: torch.Tensor
    node_grad: torch.Tensor
    rel_ids: torch.Tensor
    rel_grad: torch.Tensor


def _side(logits_pos: torch.Tensor, logits_neg: torch.Tensor, batch_id: int, side: str):
    """Loss per positive and the softmax-minus-onehot weights for one corruption side."""
    logits = torch.cat([logits_pos.unsqueeze(1), logits_neg], dim=1)
    if not torch.isfinite(logits).all():
        raise NonFiniteScoreError(batch_id, f"{side} corruption")
    lse = torch.logsumexp(logits, dim=1)
    weights = torch.softmax(logits, dim=1)
    weights[:, 0] -= 1.0
    return lse - logits_pos, weights[:, 0], weights[:, 1:]


def loss_and_grad(kind: ModelKind, batch: ScoringBatch) -> Tuple[float, GradientDelta]:
    """
    Mean over positives of the destination-side plus source-side log-softmax loss.

    Returns:
        Tuple of (loss, GradientDelta for every gathered row)
    """
    kind = ModelKind.parse(kind)
    if batch.num_positives < 1:
        raise ValueError(f"batch {batch.batch_id} has no positive edges")

    S = batch.node_emb.index_select(0, batch.src)
    R = batch.rel_emb.index_select(0, batch.rel)
    D = batch.node_emb.index_select(0, batch.dst)
    N_dst = batch.node_emb.index_select(0, batch.neg_dst)
    N_src = batch.node_emb.index_select(0, batch.neg_src)

    Q = dst_query(kind, S, R)
    P = src_query(kind, R, D)
    pos = (Q * D).sum(dim=1)

    loss_d, w0_d, W_d = _side(pos, Q @ N_dst.T, batch.batch_id, "destination")
    loss_s, w0_s, W_s = _side(pos, P @ N_src.T, batch.batch_id, "source")

    B = batch.num_positives
    loss = float((loss_d + loss_s).sum()) / B

    # weighted sums of the destination-side and source-side candidates
    M_d = w0_d.unsqueeze(1) * D + W_d @ N_dst
    M_s = w0_s.unsqueeze(1) * S + W_s @ N_src

    g_src = src_query(kind, R, M_d) + w0_s.unsqueeze(1) * P
    g_dst = dst_query(kind, M_s, R) + w0_d.unsqueeze(1) * Q
    g_rel = rel_grad(kind, S, M_d) + rel_grad(kind, M_s, D)
    g_neg_dst = W_d.T @ Q
    g_neg_src = W_s.T @ P

    node_grad = torch.zeros_like(batch.node_emb)
    node_grad.index_add_(0, batch.src, g_src)
    node_grad.index_add_(0, batch.dst, g_dst)
    node_grad.index_add_(0, batch.neg_dst, g_neg_dst)
    node_grad.index_add_(0, batch.neg_src, g_neg_src)
    node_grad /= B

    rel_grad_rows = torch.zeros_like(batch.rel_emb)
    rel_grad_rows.index_add_(0, batch.rel, g_rel)
    rel_grad_rows /= B

    if not (torch.isfinite(node_grad).all() and torch.isfinite(rel_grad_rows).all()):
        raise NonFiniteScoreError(batch.batch_id, "gradient")

    return loss, GradientDelta(batch.node_ids, node_grad, batch.rel_ids, rel_grad_rows)
