"""
Synthetic multi-relation graphs for tests and desk-scale runs.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def generate_synthetic_graph(
    num_nodes: int,
    num_edges: int,
    num_relations: int = 1,
    skew: float = 0.0,
    num_communities: int = 1,
    intra_fraction: float = 0.9,
    seed: int = 0,
) -> np.ndarray:
    """
    Draw a random edge list.

    Endpoints follow a power law over node rank with exponent `skew` (0 gives uniform).
    With num_communities > 1, nodes are split round-robin into communities and a fraction
    intra_fraction of edges keep both endpoints in one community, which gives embeddings
    something to learn.

    Returns:
        int64 array of shape (num_edges, 3) with (src, rel, dst) rows
    """
    if num_nodes < 2 or num_edges < 1 or num_relations < 1:
        raise ValueError("need num_nodes >= 2, num_edges >= 1, num_relations >= 1")
    if skew < 0:
        raise ValueError(f"skew must be >= 0, got {skew}")
    if not 1 <= num_communities <= num_nodes:
        raise ValueError(f"num_communities must be in [1, {num_nodes}]")

    rng = np.random.default_rng(seed)
    weights = np.arange(1, num_nodes + 1, dtype=np.float64) ** (-skew)
    probs = weights / weights.sum()

    src = rng.choice(num_nodes, size=num_edges, p=probs)
    dst = rng.choice(num_nodes, size=num_edges, p=probs)
    rel = rng.integers(0, num_relations, size=num_edges)

    if num_communities > 1:
        intra = rng.random(num_edges) < intra_fraction
        community = src % num_communities
        # move dst into src's community, staying inside the id range
        shifted = dst - (dst % num_communities) + community
        shifted = np.where(shifted >= num_nodes, shifted - num_communities, shifted)
        dst = np.where(intra, shifted, dst)
        # relations follow the community so (s, r) predicts d
        rel = np.where(intra, community % num_relations, rel)

    return np.stack([src, rel, dst], axis=1).astype(np.int64)


def complete_bipartite_edges(left: int, right: int) -> np.ndarray:
    """Every (l, 0, left + r) edge: a dense graph useful for optimizer checks."""
    ls, rs = np.meshgrid(np.arange(left), np.arange(right), indexing="ij")
    src = ls.ravel()
    dst = left + rs.ravel()
    return np.stack([src, np.zeros_like(src), dst], axis=1).astype(np.int64)


def write_edge_list(edges: np.ndarray, path: Union[str, Path], delimiter: str = "\t") -> Path:
    """Write (src, rel, dst) rows as a text edge list that ingest() can read."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(np.asarray(edges).reshape(-1, 3), columns=["src", "rel", "dst"])
    df["src"] = "n" + df["src"].astype(str)
    df["rel"] = "r" + df["rel"].astype(str)
    df["dst"] = "n" + df["dst"].astype(str)
    df.to_csv(out, sep=delimiter, header=False, index=False)
    logger.debug("wrote %d synthetic edges to %s", len(df), out)
    return out
