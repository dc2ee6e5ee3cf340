"""
On-disk layout of a preprocessed dataset and its binary formats.

Every numeric file is a flat little-endian array:
    edges_<split>.bin     (n, 3) uint32 triples (src, rel, dst)
    bucket_offsets.bin    p*p + 1 uint64 offsets into edges_train.bin
    node_part_<k>.bin     rows x d float32 parameters, then rows x d float32 Adagrad state
    relations.bin         |R| x d float32 parameters, then |R| x d float32 Adagrad state
"""

import logging
import os
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch

from ..utils.errors import GraphFormatError
from ..utils.utils import dump_json_file, load_json_file
from .meta import EdgeBucketStore, GraphMeta

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

EDGE_DTYPE = np.dtype("<u4")
OFFSET_DTYPE = np.dtype("<u8")
PARAM_DTYPE = np.dtype("<f4")
SPLITS = ("train", "valid", "test")


@dataclass
class PartitionBlock:
    """One node partition (or the relation table): parameters plus Adagrad accumulator."""

    partition_id: int
    params: torch.Tensor
    state: torch.Tensor

    def __post_init__(self) -> None:
        if self.params.shape != self.state.shape:
            raise GraphFormatError(
                f"params {tuple(self.params.shape)} and state {tuple(self.state.shape)} differ in shape"
            )

    @property
    def rows(self) -> int:
        return int(self.params.shape[0])

    @property
    def dim(self) -> int:
        return int(self.params.shape[1])

    @property
    def nbytes(self) -> int:
        return 2 * self.rows * self.dim * PARAM_DTYPE.itemsize

    def clone(self) -> "PartitionBlock":
        return PartitionBlock(self.partition_id, self.params.clone(), self.state.clone())

    @classmethod
    def zeros(cls, partition_id: int, rows: int, dim: int) -> "PartitionBlock":
        return cls(
            partition_id,
            torch.zeros(rows, dim, dtype=torch.float32),
            torch.zeros(rows, dim, dtype=torch.float32),
        )


class DatasetLayout:
    """File names of a dataset directory."""

    def __init__(self, root: PathLike):
        self.root = Path(root)

    @property
    def meta_path(self) -> Path:
        return self.root / "meta.json"

    @property
    def bucket_offsets_path(self) -> Path:
        return self.root / "bucket_offsets.bin"

    @property
    def relations_path(self) -> Path:
        return self.root / "relations.bin"

    @property
    def node_mapping_path(self) -> Path:
        return self.root / "node_mapping.txt"

    @property
    def rel_mapping_path(self) -> Path:
        return self.root / "rel_mapping.txt"

    def edges_path(self, split: str) -> Path:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}, expected one of {SPLITS}")
        return self.root / f"edges_{split}.bin"

    def partition_path(self, partition_id: int) -> Path:
        return self.root / f"node_part_{partition_id}.bin"

    def exists(self) -> bool:
        return self.meta_path.exists()


def _read_flat(path: Path, dtype: np.dtype, expected_count: Optional[int] = None) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(f"Binary file not found: {path}")
    size = path.stat().st_size
    if size % dtype.itemsize:
        raise GraphFormatError(f"file size {size} is not a multiple of {dtype.itemsize}", str(path))
    if expected_count is not None and size != expected_count * dtype.itemsize:
        raise GraphFormatError(
            f"expected {expected_count * dtype.itemsize} bytes, found {size} (truncated or wrong meta)",
            str(path),
        )
    return np.fromfile(path, dtype=dtype)


def _write_atomic(path: Path, *arrays: np.ndarray) -> None:
    """Write arrays back to back into a temp file, then rename over the target."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        for arr in arrays:
            np.ascontiguousarray(arr).tofile(f)
    os.replace(tmp, path)


class GraphStore:
    """
    Reads and writes every binary file of one dataset directory against its GraphMeta.

    Partition reads/writes may run concurrently for distinct partition ids.
    """

    def __init__(self, root: PathLike, meta: GraphMeta):
        self.layout = DatasetLayout(root)
        self.meta = meta

    @classmethod
    def create(cls, root: PathLike, meta: GraphMeta, force: bool = False) -> "GraphStore":
        layout = DatasetLayout(root)
        if layout.exists() and not force:
            raise FileExistsError(f"Dataset already exists at {layout.root} (use force to overwrite)")
        layout.root.mkdir(parents=True, exist_ok=True)
        store = cls(root, meta)
        store.write_meta()
        return store

    @classmethod
    def open(cls, root: PathLike) -> "GraphStore":
        layout = DatasetLayout(root)
        if not layout.exists():
            raise FileNotFoundError(f"No dataset found at {layout.root} (missing meta.json)")
        meta = GraphMeta.model_validate(load_json_file(layout.meta_path))
        return cls(root, meta)

    @property
    def root(self) -> Path:
        return self.layout.root

    def write_meta(self) -> Path:
        return dump_json_file(self.meta.model_dump(mode="json"), self.layout.meta_path)

    # edges

    def write_edges(self, split: str, edges: np.ndarray) -> Path:
        edges = np.asarray(edges).reshape(-1, 3)
        if len(edges) and (edges.min() < 0 or edges.max() >= 2**32):
            raise GraphFormatError("edge ids must fit in uint32")
        path = self.layout.edges_path(split)
        _write_atomic(path, edges.astype(EDGE_DTYPE))
        return path

    def read_edges(self, split: str) -> np.ndarray:
        expected = self.meta.split_sizes[SPLITS.index(split)]
        path = self.layout.edges_path(split)
        flat = _read_flat(path, EDGE_DTYPE, expected * 3)
        edges = flat.reshape(-1, 3).astype(np.int64)
        if len(edges):
            if edges[:, [0, 2]].max() >= self.meta.num_nodes or edges[:, 1].max() >= self.meta.num_relations:
                raise GraphFormatError("edge id out of range for meta", str(path))
        return edges

    def write_bucket_offsets(self, offsets: np.ndarray) -> Path:
        p = self.meta.num_partitions
        if len(offsets) != p * p + 1:
            raise GraphFormatError(f"expected {p * p + 1} bucket offsets, got {len(offsets)}")
        path = self.layout.bucket_offsets_path
        _write_atomic(path, np.asarray(offsets).astype(OFFSET_DTYPE))
        return path

    def read_bucket_offsets(self) -> np.ndarray:
        p = self.meta.num_partitions
        return _read_flat(self.layout.bucket_offsets_path, OFFSET_DTYPE, p * p + 1).astype(np.int64)

    def write_bucket_store(self, store: EdgeBucketStore) -> None:
        if store.num_partitions != self.meta.num_partitions:
            raise GraphFormatError(
                f"bucket store has {store.num_partitions} partitions, meta has {self.meta.num_partitions}"
            )
        self.write_edges("train", store.edges)
        self.write_bucket_offsets(store.offsets)

    def load_bucket_store(self) -> EdgeBucketStore:
        return EdgeBucketStore(
            edges=self.read_edges("train"),
            offsets=self.read_bucket_offsets(),
            num_partitions=self.meta.num_partitions,
        )

    # parameters

    def _read_block(self, path: Path, block_id: int, rows: int) -> PartitionBlock:
        d = self.meta.embedding_dim
        flat = _read_flat(path, PARAM_DTYPE, 2 * rows * d)
        arr = flat.astype(np.float32, copy=False).reshape(2, rows, d)
        return PartitionBlock(
            block_id,
            torch.from_numpy(np.array(arr[0])),
            torch.from_numpy(np.array(arr[1])),
        )

    def _write_block(self, path: Path, block: PartitionBlock, rows: int) -> None:
        d = self.meta.embedding_dim
        if block.rows != rows or block.dim != d:
            raise GraphFormatError(
                f"block {block.partition_id} is {block.rows}x{block.dim}, meta expects {rows}x{d}",
                str(path),
            )
        _write_atomic(
            path,
            block.params.detach().cpu().numpy().astype(PARAM_DTYPE, copy=False),
            block.state.detach().cpu().numpy().astype(PARAM_DTYPE, copy=False),
        )

    def read_partition(self, partition_id: int) -> PartitionBlock:
        rows = self.meta.partition_rows(partition_id)
        return self._read_block(self.layout.partition_path(partition_id), partition_id, rows)

    def write_partition(self, partition_id: int, block: PartitionBlock) -> Path:
        rows = self.meta.partition_rows(partition_id)
        path = self.layout.partition_path(partition_id)
        self._write_block(path, block, rows)
        return path

    def read_relations(self) -> PartitionBlock:
        return self._read_block(self.layout.relations_path, -1, self.meta.num_relations)

    def write_relations(self, block: PartitionBlock) -> Path:
        path = self.layout.relations_path
        self._write_block(path, block, self.meta.num_relations)
        return path

    def read_all_nodes(self) -> PartitionBlock:
        """Concatenate every partition in order into one block covering all node rows."""
        blocks = [self.read_partition(k) for k in range(self.meta.num_partitions)]
        return PartitionBlock(
            -1,
            torch.cat([b.params for b in blocks]),
            torch.cat([b.state for b in blocks]),
        )

    def copy_parameters_to(self, target_dir: PathLike) -> Path:
        """Copy meta.json, relations.bin and every node partition into target_dir."""
        target = Path(target_dir)
        target.mkdir(parents=True, exist_ok=True)
        names = [self.layout.meta_path, self.layout.relations_path] + [
            self.layout.partition_path(k) for k in range(self.meta.num_partitions)
        ]
        for src in names:
            shutil.copy2(src, target / src.name)
        logger.debug("copied parameters of %s to %s", self.root, target)
        return target
