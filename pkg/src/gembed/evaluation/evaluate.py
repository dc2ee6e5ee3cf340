"""
Link-prediction evaluation of a dataset split.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from ..buffer.io import DiskPartitionIO
from ..buffer.partition_buffer import PartitionBuffer
from ..graph.storage import SPLITS, GraphStore
from ..model.sampling import DegreeTable, NegativeSampleSpec, NodePool, sample_negatives
from ..model.scoring import ModelKind
from ..ordering.generators import sequential_order
from ..utils.errors import EvaluationError
from .metrics import DEFAULT_K, EvalReport, aggregate
from .ranking import SIDES, EmbeddingTable, TrueTripleIndex, rank_batch

logger = logging.getLogger(__name__)

EVAL_STREAM = 6


class EvalSpec(BaseModel):
    """
    Evaluation protocol.

    filtered ranks against every node and drops known triples; num_negatives and alpha
    only apply to unfiltered evaluation.
    """

    model_config = ConfigDict(frozen=True)

    num_negatives: int = Field(default=1000, ge=0)
    alpha: float = Field(default=0.0, ge=0.0, le=1.0)
    filtered: bool = False
    k_list: Tuple[int, ...] = DEFAULT_K
    seed: int = 0
    batch_size: int = Field(default=1000, ge=1)
    workers: int = Field(default=1, ge=1)

    @field_validator("k_list")
    @classmethod
    def _positive_k(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value or min(value) < 1:
            raise ValueError(f"k_list needs positive cut-offs, got {value}")
        return tuple(sorted(set(value)))


def eval_negatives(
    spec: EvalSpec,
    num_nodes: int,
    degree_table: DegreeTable,
    num_chunks: int,
) -> List[Dict[str, np.ndarray]]:
    """One shared negative set per chunk and corruption side."""
    if spec.filtered:
        everyone = np.arange(num_nodes, dtype=np.int64)
        return [{side: everyone for side in SIDES} for _ in range(num_chunks)]
    sample_spec = NegativeSampleSpec(n_t=spec.num_negatives, alpha=spec.alpha, seed=spec.seed)
    pool = NodePool.full(num_nodes)
    out = []
    for chunk in range(num_chunks):
        out.append({
            side: sample_negatives(
                sample_spec, degree_table, pool,
                np.random.default_rng([spec.seed, EVAL_STREAM, chunk, n]),
            )
            for n, side in enumerate(SIDES)
        })
    return out


def gather_node_rows(params: GraphStore, ids: np.ndarray) -> EmbeddingTable:
    """
    Collect the rows of `ids` by streaming partitions through a read-only buffer.

    One partition is resident at a time, plus the prefetch staging block.
    """
    ids = np.unique(np.asarray(ids, dtype=np.int64))
    meta = params.meta
    owner = meta.partition_of(ids)
    rows = torch.empty(len(ids), meta.embedding_dim, dtype=torch.float32)
    plan = sequential_order(meta.num_partitions, 1)
    with PartitionBuffer(DiskPartitionIO(params), plan, read_only=True) as buffer:
        for k in range(meta.num_partitions):
            block, _ = buffer.acquire_pair(k, k)
            try:
                mask = owner == k
                if mask.any():
                    local = torch.from_numpy(ids[mask] - int(meta.partition_offsets[k]))
                    rows[torch.from_numpy(mask)] = block.params.index_select(0, local)
            finally:
                buffer.release_pair(k, k)
        buffer.flush()
        logger.debug("gathered %d node rows with %d partition reads", len(ids), buffer.stats.reads)
    return EmbeddingTable(ids, rows)


def evaluate_edges(
    edges: np.ndarray,
    spec: EvalSpec,
    kind: ModelKind,
    num_nodes: int,
    degree_table: DegreeTable,
    relations: torch.Tensor,
    nodes: Optional[EmbeddingTable] = None,
    params: Optional[GraphStore] = None,
    filter_index: Optional[TrueTripleIndex] = None,
    progress: bool = False,
) -> EvalReport:
    """
    Rank both corruption sides of every edge and aggregate.

    Node rows come from `nodes` when given, otherwise they are streamed from `params`.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    if len(edges) == 0:
        raise EvaluationError("nothing to evaluate: the split has no edges")
    if spec.filtered and filter_index is None:
        raise EvaluationError("filtered evaluation needs the index of true triples")
    kind = ModelKind.parse(kind)

    chunks = [np.arange(a, min(a + spec.batch_size, len(edges))) for a in range(0, len(edges), spec.batch_size)]
    negatives = eval_negatives(spec, num_nodes, degree_table, len(chunks))

    if nodes is None:
        if params is None:
            raise EvaluationError("need either gathered node rows or a parameter store")
        if spec.filtered:
            needed = np.arange(num_nodes, dtype=np.int64)
        else:
            needed = np.concatenate(
                [edges[:, 0], edges[:, 2]] + [neg for per_chunk in negatives for neg in per_chunk.values()]
            )
        nodes = gather_node_rows(params, needed)

    def rank_chunk(c: int) -> Tuple[np.ndarray, np.ndarray]:
        chunk = edges[chunks[c]]
        ranks = []
        for side in SIDES:
            excluded = filter_index.exclusions(chunk, side) if spec.filtered else None
            ranks.append(rank_batch(chunk, side, negatives[c][side], nodes, relations, kind, excluded))
        return ranks[0], ranks[1]

    with ThreadPoolExecutor(spec.workers, thread_name_prefix="eval") as pool:
        results = list(tqdm(
            pool.map(rank_chunk, range(len(chunks))), total=len(chunks), desc="eval", disable=not progress,
        ))

    dst_ranks = np.concatenate([r[0] for r in results])
    src_ranks = np.concatenate([r[1] for r in results])
    report = aggregate(np.concatenate([dst_ranks, src_ranks]), spec.k_list, {"dst": dst_ranks, "src": src_ranks})
    report.filtered = spec.filtered
    report.num_negatives = num_nodes if spec.filtered else spec.num_negatives
    return report


def load_true_triples(store: GraphStore) -> TrueTripleIndex:
    return TrueTripleIndex(np.concatenate([store.read_edges(split) for split in SPLITS]))


def evaluate_split(
    store: GraphStore,
    split: str,
    spec: EvalSpec,
    kind: ModelKind,
    params: Optional[GraphStore] = None,
    nodes: Optional[torch.Tensor] = None,
    relations: Optional[torch.Tensor] = None,
    progress: bool = False,
) -> EvalReport:
    """
    Evaluate one split of a prepared dataset.

    Args:
        store: Dataset (edges, degrees, true triples)
        split: "train", "valid" or "test"
        spec: Protocol
        kind: Score function
        params: Where parameters live (a checkpoint directory); defaults to `store`
        nodes, relations: In-memory parameters; when given, no partition is read
        progress: Show a progress bar
    """
    if split not in SPLITS:
        raise EvaluationError(f"unknown split {split!r}, expected one of {SPLITS}")
    edges = store.read_edges(split)
    if len(edges) == 0:
        raise EvaluationError(f"split '{split}' is empty")
    params = params if params is not None else store
    if params.meta.num_nodes != store.meta.num_nodes:
        raise EvaluationError(
            f"parameters cover {params.meta.num_nodes} nodes, dataset has {store.meta.num_nodes}"
        )

    table = EmbeddingTable.full(nodes) if nodes is not None else None
    relation_rows = relations if relations is not None else params.read_relations().params
    report = evaluate_edges(
        edges,
        spec,
        kind,
        store.meta.num_nodes,
        DegreeTable.from_edges(store.read_edges("train")),
        relation_rows,
        nodes=table,
        params=params,
        filter_index=load_true_triples(store) if spec.filtered else None,
        progress=progress,
    )
    report.split = split
    logger.info(report.summary())
    return report
