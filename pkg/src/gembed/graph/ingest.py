"""
Raw edge-list ingestion: token parsing, dense id remapping, seeded splitting.

Input lines look like "src [rel] dst"; blank lines and lines starting with '#' or '%' are skipped.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..utils.errors import IngestError
from .meta import GraphMeta

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
SPLIT_NAMES = ("train", "valid", "test")
_COMMENT_PREFIXES = ("#", "%")
_COLUMN_ORDERS = ("srd", "sdr", "sd")


@dataclass
class IngestResult:
    """
    Output of ingestion.

    Attributes:
        meta: Counts of the ingested graph (num_partitions = 1, embedding_dim as requested)
        splits: "train" / "valid" / "test" -> int64 array of shape (n, 3) with dense ids
        node_tokens: node_tokens[i] is the raw token of dense node id i
        relation_tokens: relation_tokens[i] is the raw token of dense relation id i
    """

    meta: GraphMeta
    splits: Dict[str, np.ndarray]
    node_tokens: List[str] = field(default_factory=list)
    relation_tokens: List[str] = field(default_factory=list)

    def save_mappings(self, output_dir: PathLike) -> Tuple[Path, Path]:
        """Write node_mapping.txt and rel_mapping.txt (raw token, tab, dense id)."""
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        node_path = out / "node_mapping.txt"
        rel_path = out / "rel_mapping.txt"
        pd.DataFrame({"token": self.node_tokens, "id": np.arange(len(self.node_tokens))}).to_csv(
            node_path, sep="\t", header=False, index=False
        )
        pd.DataFrame(
            {"token": self.relation_tokens, "id": np.arange(len(self.relation_tokens))}
        ).to_csv(rel_path, sep="\t", header=False, index=False)
        return node_path, rel_path


def load_mapping(path: PathLike) -> Dict[str, int]:
    """Read a mapping file written by IngestResult.save_mappings."""
    df = pd.read_csv(path, sep="\t", header=None, names=["token", "id"], dtype={"token": str},
                     keep_default_na=False)
    return dict(zip(df["token"], df["id"].astype(int)))


def _iter_edge_tokens(
    path: Path, delimiter: Optional[str], column_order: Optional[str]
) -> Iterator[Tuple[str, str, str]]:
    """Yield (src, rel, dst) tokens; rel is '0' when the file has no relation column."""
    order = column_order
    with open(path, "r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith(_COMMENT_PREFIXES):
                continue
            tokens = line.split(delimiter) if delimiter else line.split()
            tokens = [t.strip() for t in tokens]
            if order is None:
                if len(tokens) == 3:
                    order = "srd"
                elif len(tokens) == 2:
                    order = "sd"
                else:
                    raise IngestError(
                        f"expected 2 or 3 columns, got {len(tokens)}", str(path), line_number
                    )
            if len(tokens) != len(order) or any(t == "" for t in tokens):
                raise IngestError(
                    f"expected {len(order)} columns, got {len(tokens)}", str(path), line_number
                )
            row = dict(zip(order, tokens))
            yield row["s"], row.get("r", "0"), row["d"]


def _read_columns(
    path: PathLike, delimiter: Optional[str], column_order: Optional[str]
) -> Tuple[List[str], List[str], List[str]]:
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Edge list not found: {file_path}")
    if column_order is not None and column_order not in _COLUMN_ORDERS:
        raise ValueError(f"column_order must be one of {_COLUMN_ORDERS}, got {column_order!r}")

    src: List[str] = []
    rel: List[str] = []
    dst: List[str] = []
    for s, r, d in _iter_edge_tokens(file_path, delimiter, column_order):
        src.append(s)
        rel.append(r)
        dst.append(d)
    return src, rel, dst


def _remap(
    columns: Sequence[Tuple[List[str], List[str], List[str]]]
) -> Tuple[List[np.ndarray], List[str], List[str]]:
    """Assign dense ids jointly over several files, in first-appearance order."""
    lengths = [len(c[0]) for c in columns]
    all_src = [t for c in columns for t in c[0]]
    all_rel = [t for c in columns for t in c[1]]
    all_dst = [t for c in columns for t in c[2]]

    n = len(all_src)
    # interleave src/dst per edge so first appearance follows line order
    endpoints = np.empty(2 * n, dtype=object)
    endpoints[0::2] = all_src
    endpoints[1::2] = all_dst
    node_codes, node_uniques = pd.factorize(endpoints)
    rel_codes, rel_uniques = pd.factorize(np.asarray(all_rel, dtype=object))

    edges = np.stack([node_codes[0::2], rel_codes, node_codes[1::2]], axis=1).astype(np.int64)
    parts = np.split(edges, np.cumsum(lengths)[:-1]) if len(lengths) > 1 else [edges]
    return parts, [str(t) for t in node_uniques], [str(t) for t in rel_uniques]


def _check_fractions(split_fractions: Sequence[float]) -> Tuple[float, float, float]:
    if len(split_fractions) != 3:
        raise ValueError(f"split_fractions needs 3 entries, got {len(split_fractions)}")
    fractions = tuple(float(f) for f in split_fractions)
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-6:
        raise ValueError(f"split_fractions must be non-negative and sum to 1, got {fractions}")
    return fractions  # type: ignore[return-value]


def ingest(
    edge_list_file: PathLike,
    delimiter: Optional[str] = None,
    split_fractions: Sequence[float] = (1.0, 0.0, 0.0),
    seed: int = 0,
    embedding_dim: int = 100,
    column_order: Optional[str] = None,
    output_dir: Optional[PathLike] = None,
) -> IngestResult:
    """
    Ingest one raw edge list.

    Args:
        edge_list_file: Line-oriented edge list
        delimiter: Column separator (None splits on any whitespace)
        split_fractions: (train, valid, test) fractions summing to 1
        seed: Shuffle seed
        embedding_dim: Stored in the returned GraphMeta
        column_order: "srd", "sdr" or "sd"; inferred from the first data line when omitted
        output_dir: When given, mapping files are written there

    Returns:
        IngestResult with dense-id splits
    """
    fractions = _check_fractions(split_fractions)
    columns = _read_columns(edge_list_file, delimiter, column_order)
    if not columns[0]:
        raise IngestError("edge list contains no edges", str(edge_list_file))

    (edges,), node_tokens, relation_tokens = _remap([columns])

    num_edges = len(edges)
    rng = np.random.default_rng(seed)
    edges = edges[rng.permutation(num_edges)]

    n_valid = int(round(fractions[1] * num_edges))
    n_test = int(round(fractions[2] * num_edges))
    n_train = num_edges - n_valid - n_test
    if n_train < 0:
        raise ValueError(f"split_fractions {fractions} leave no room for training edges")

    splits = {
        "train": edges[:n_train],
        "valid": edges[n_train:n_train + n_valid],
        "test": edges[n_train + n_valid:],
    }
    result = _build_result(splits, node_tokens, relation_tokens, embedding_dim)
    logger.info(
        "ingested %s: %d nodes, %d relations, %d edges",
        edge_list_file, result.meta.num_nodes, result.meta.num_relations, num_edges,
    )
    if output_dir is not None:
        result.save_mappings(output_dir)
    return result


def ingest_presplit(
    train_file: PathLike,
    valid_file: PathLike,
    test_file: PathLike,
    delimiter: Optional[str] = None,
    embedding_dim: int = 100,
    column_order: Optional[str] = None,
    output_dir: Optional[PathLike] = None,
) -> IngestResult:
    """Ingest a dataset that ships its own train/valid/test files; ids are shared across files."""
    columns = [_read_columns(p, delimiter, column_order) for p in (train_file, valid_file, test_file)]
    if not columns[0][0]:
        raise IngestError("training edge list contains no edges", str(train_file))

    parts, node_tokens, relation_tokens = _remap(columns)
    splits = dict(zip(SPLIT_NAMES, parts))
    result = _build_result(splits, node_tokens, relation_tokens, embedding_dim)
    logger.info(
        "ingested presplit dataset: %d nodes, %d relations, splits %s",
        result.meta.num_nodes, result.meta.num_relations, result.meta.split_sizes,
    )
    if output_dir is not None:
        result.save_mappings(output_dir)
    return result


def _build_result(
    splits: Dict[str, np.ndarray],
    node_tokens: List[str],
    relation_tokens: List[str],
    embedding_dim: int,
) -> IngestResult:
    sizes = tuple(len(splits[name]) for name in SPLIT_NAMES)
    meta = GraphMeta(
        num_nodes=len(node_tokens),
        num_relations=len(relation_tokens),
        num_edges=sum(sizes),
        num_partitions=1,
        embedding_dim=embedding_dim,
        split_sizes=sizes,
    )
    return IngestResult(
        meta=meta, splits=splits, node_tokens=node_tokens, relation_tokens=relation_tokens
    )
