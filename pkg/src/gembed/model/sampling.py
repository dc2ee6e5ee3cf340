"""
Negative sampling: uniform draws from a node pool mixed with degree-proportional draws.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


class NegativeSampleSpec(BaseModel):
    n_t: int = Field(default=1000, ge=0)
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    seed: int = 0

    @property
    def num_degree(self) -> int:
        return math.ceil(self.alpha * self.n_t)

    @property
    def num_uniform(self) -> int:
        return self.n_t - self.num_degree


@dataclass
class NodePool:
    """Candidate negatives as a union of half-open global id ranges."""

    ranges: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.ranges = [(int(a), int(b)) for a, b in self.ranges if b > a]
        lengths = [b - a for a, b in self.ranges]
        self._cum = np.cumsum([0] + lengths).astype(np.int64)

    @classmethod
    def full(cls, num_nodes: int) -> "NodePool":
        return cls([(0, num_nodes)])

    @property
    def size(self) -> int:
        return int(self._cum[-1])

    def __len__(self) -> int:
        return self.size

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample negatives from an empty node pool")
        positions = rng.integers(0, self.size, size=n)
        which = np.searchsorted(self._cum, positions, side="right") - 1
        starts = np.array([a for a, _ in self.ranges], dtype=np.int64)
        return starts[which] + (positions - self._cum[which])

    def contains(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        mask = np.zeros(ids.shape, dtype=bool)
        for a, b in self.ranges:
            mask |= (ids >= a) & (ids < b)
        return mask

    def all_ids(self) -> np.ndarray:
        return np.concatenate([np.arange(a, b, dtype=np.int64) for a, b in self.ranges]) \
            if self.ranges else np.zeros(0, dtype=np.int64)


@dataclass
class DegreeTable:
    """
    Edge endpoints; a uniform pick among them is a degree-proportional node draw.
    """

    endpoints: np.ndarray

    @classmethod
    def from_edges(cls, edges: np.ndarray) -> "DegreeTable":
        edges = np.asarray(edges).reshape(-1, 3)
        return cls(np.concatenate([edges[:, 0], edges[:, 2]]).astype(np.int64))

    @classmethod
    def from_degrees(cls, degrees: Sequence[int]) -> "DegreeTable":
        degrees = np.asarray(degrees, dtype=np.int64)
        return cls(np.repeat(np.arange(len(degrees), dtype=np.int64), degrees))

    def __len__(self) -> int:
        return len(self.endpoints)

    def restrict(self, pool: NodePool) -> "DegreeTable":
        return DegreeTable(self.endpoints[pool.contains(self.endpoints)])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.endpoints[rng.integers(0, len(self.endpoints), size=n)]


def sample_negatives(
    spec: NegativeSampleSpec,
    degree_table: DegreeTable,
    node_pool: NodePool,
    rng: Optional[np.random.Generator] = None,
    count: Optional[int] = None,
) -> np.ndarray:
    """
    Draw ceil(alpha * n) degree-based ids and the rest uniformly, both from node_pool.

    Args:
        spec: Counts and mixing fraction
        degree_table: Endpoints to draw degree-based negatives from (entries outside the pool are ignored)
        node_pool: Candidate nodes
        rng: Generator for this draw; a fresh one seeded from spec.seed when omitted
        count: Override for spec.n_t (evaluation uses its own negative count)

    Returns:
        int64 array of global node ids
    """
    if node_pool.size == 0:
        raise ValueError("cannot sample negatives from an empty node pool")
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    n = spec.n_t if count is None else count
    n_degree = math.ceil(spec.alpha * n)
    n_uniform = n - n_degree

    inside = degree_table.endpoints[node_pool.contains(degree_table.endpoints)]
    if n_degree and len(inside) == 0:
        logger.debug("no degree entries inside the pool, drawing %d uniform negatives instead", n_degree)
        n_uniform, n_degree = n, 0

    parts = []
    if n_degree:
        parts.append(inside[rng.integers(0, len(inside), size=n_degree)])
    if n_uniform:
        parts.append(node_pool.sample_uniform(rng, n_uniform))
    if not parts:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(parts).astype(np.int64)
