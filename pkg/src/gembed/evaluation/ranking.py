"""
Ranking of positive edges against corrupted candidates.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from ..model.scoring import ModelKind, dst_query, src_query

logger = logging.getLogger(__name__)

SIDES = ("dst", "src")


@dataclass
class EmbeddingTable:
    """Node rows for a sorted set of global ids."""

    ids: np.ndarray
    params: torch.Tensor

    @classmethod
    def full(cls, params: torch.Tensor) -> "EmbeddingTable":
        return cls(np.arange(params.shape[0], dtype=np.int64), params)

    def lookup(self, global_ids: np.ndarray) -> torch.Tensor:
        global_ids = np.asarray(global_ids, dtype=np.int64)
        pos = np.searchsorted(self.ids, global_ids)
        pos = np.minimum(pos, len(self.ids) - 1)
        if len(global_ids) and not np.array_equal(self.ids[pos], global_ids):
            missing = global_ids[self.ids[pos] != global_ids][0]
            raise KeyError(f"node {int(missing)} was not gathered for evaluation")
        return self.params.index_select(0, torch.from_numpy(pos))


class TrueTripleIndex:
    """Known objects per (src, rel) and known subjects per (rel, dst)."""

    def __init__(self, edges: np.ndarray):
        frame = pd.DataFrame(np.asarray(edges, dtype=np.int64).reshape(-1, 3), columns=["src", "rel", "dst"])
        self._objects = {
            (int(s), int(r)): np.asarray(v, dtype=np.int64)
            for (s, r), v in frame.groupby(["src", "rel"])["dst"].unique().items()
        }
        self._subjects = {
            (int(r), int(d)): np.asarray(v, dtype=np.int64)
            for (r, d), v in frame.groupby(["rel", "dst"])["src"].unique().items()
        }

    def __len__(self) -> int:
        return sum(len(v) for v in self._objects.values())

    def true_candidates(self, edge: Sequence[int], side: str) -> np.ndarray:
        s, r, d = (int(x) for x in edge)
        if side == "dst":
            return self._objects.get((s, r), np.zeros(0, dtype=np.int64))
        return self._subjects.get((r, d), np.zeros(0, dtype=np.int64))

    def exclusions(self, edges: np.ndarray, side: str) -> List[np.ndarray]:
        return [self.true_candidates(edge, side) for edge in edges]


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"corruption side must be one of {SIDES}, got {side!r}")


def _exclusion_mask(negative_ids: np.ndarray, excluded: Sequence[np.ndarray]) -> torch.Tensor:
    n = len(negative_ids)
    mask = np.zeros((len(excluded), n), dtype=bool)
    dense = n > 0 and bool(np.array_equal(negative_ids, np.arange(n)))
    for row, ids in enumerate(excluded):
        if len(ids) == 0:
            continue
        if dense:
            mask[row, ids[ids < n]] = True
        else:
            mask[row] = np.isin(negative_ids, ids)
    return torch.from_numpy(mask)


def rank_batch(
    edges: np.ndarray,
    side: str,
    negative_ids: np.ndarray,
    nodes: EmbeddingTable,
    relations: torch.Tensor,
    kind: ModelKind,
    excluded: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """
    Rank every edge against one shared negative set.

    rank = 1 + number of kept negatives scoring >= the positive, so ties count against
    the positive. A negative equal to the edge's own endpoint is never counted; negatives
    listed in excluded[b] are dropped for edge b.
    """
    _check_side(side)
    kind = ModelKind.parse(kind)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    negative_ids = np.asarray(negative_ids, dtype=np.int64)
    if len(negative_ids) == 0:
        logger.warning("no negatives to rank %d edges against, every rank is 1", len(edges))
        return np.ones(len(edges), dtype=np.int64)

    S = nodes.lookup(edges[:, 0])
    R = relations.index_select(0, torch.from_numpy(edges[:, 1]))
    D = nodes.lookup(edges[:, 2])
    N = nodes.lookup(negative_ids)
    if side == "dst":
        query = dst_query(kind, S, R)
        positive = (query * D).sum(dim=1)
    else:
        query = src_query(kind, R, D)
        positive = (query * S).sum(dim=1)
    scores = query @ N.T

    beats = scores >= positive.unsqueeze(1)
    # the uncorrupted endpoint reproduces the positive itself
    own = torch.from_numpy(edges[:, 2] if side == "dst" else edges[:, 0])
    beats &= torch.from_numpy(negative_ids).unsqueeze(0) != own.unsqueeze(1)
    if excluded is not None:
        beats &= ~_exclusion_mask(negative_ids, excluded)
    return (1 + beats.sum(dim=1)).numpy().astype(np.int64)


def rank_edge(
    edge: Sequence[int],
    side: str,
    negative_ids: np.ndarray,
    nodes: EmbeddingTable,
    relations: torch.Tensor,
    kind: ModelKind,
    filter_index: Optional[TrueTripleIndex] = None,
) -> int:
    """Rank of one edge; with filter_index, negatives forming a known triple are dropped."""
    edges = np.asarray(edge, dtype=np.int64).reshape(1, 3)
    excluded = filter_index.exclusions(edges, side) if filter_index is not None else None
    return int(rank_batch(edges, side, negative_ids, nodes, relations, kind, excluded)[0])


def rank_both_sides(
    edges: np.ndarray,
    negatives: Dict[str, np.ndarray],
    nodes: EmbeddingTable,
    relations: torch.Tensor,
    kind: ModelKind,
    filter_index: Optional[TrueTripleIndex] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Ranks for destination and source corruption of the same edges."""
    out = []
    for side in SIDES:
        excluded = filter_index.exclusions(edges, side) if filter_index is not None else None
        out.append(rank_batch(edges, side, negatives[side], nodes, relations, kind, excluded))
    return out[0], out[1]
