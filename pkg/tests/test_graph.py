#!/usr/bin/env python3
"""
Tests for ingestion, partitioning, bucketing and the binary formats.
"""

import hashlib
import sys
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
import torch

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from gembed.graph import (
    GraphMeta,
    GraphStore,
    PartitionBlock,
    bucket_edges,
    generate_synthetic_graph,
    ingest,
    ingest_presplit,
    load_mapping,
    node_degrees,
    partition_nodes,
    write_edge_list,
)
from gembed.utils.errors import GraphFormatError, IngestError


def _meta(num_nodes, num_edges=0, p=1, d=4, num_relations=1):
    return GraphMeta(
        num_nodes=num_nodes,
        num_relations=num_relations,
        num_edges=num_edges,
        num_partitions=p,
        embedding_dim=d,
        split_sizes=(num_edges, 0, 0),
    )


def test_ingest_counts(tmp_path):
    path = tmp_path / "edges.txt"
    path.write_text("a r1 b\nb r1 c\na r2 c\n")
    result = ingest(path, split_fractions=(1, 0, 0))
    assert result.meta.num_nodes == 3
    assert result.meta.num_relations == 2
    assert result.meta.num_edges == 3
    assert result.meta.split_sizes == (3, 0, 0)


def test_ingest_two_columns_and_comments(tmp_path):
    path = tmp_path / "snap.txt"
    path.write_text("# a comment\n% another\n\n1 2\n2 3\n3 1\n")
    result = ingest(path)
    assert result.meta.num_relations == 1
    assert result.meta.num_nodes == 3
    assert set(result.splits["train"][:, 1].tolist()) == {0}


def test_ingest_first_appearance_ids(tmp_path):
    path = tmp_path / "edges.txt"
    path.write_text("x r y\ny r z\n")
    result = ingest(path)
    assert result.node_tokens == ["x", "y", "z"]
    assert result.relation_tokens == ["r"]


def test_ingest_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("a r b\na r b c\n")
    with pytest.raises(IngestError) as err:
        ingest(path)
    assert err.value.line_number == 2
    assert ":2:" in str(err.value)


def test_ingest_empty_file(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# only a comment\n")
    with pytest.raises(IngestError):
        ingest(path)


def test_ingest_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest(tmp_path / "nope.txt")


def test_ingest_split_and_determinism(tmp_path):
    edges = generate_synthetic_graph(50, 200, num_relations=3, seed=1)
    path = write_edge_list(edges, tmp_path / "g.tsv")
    first = ingest(path, split_fractions=(0.8, 0.1, 0.1), seed=7)
    second = ingest(path, split_fractions=(0.8, 0.1, 0.1), seed=7)
    assert first.meta.split_sizes == (160, 20, 20)
    for name in ("train", "valid", "test"):
        assert np.array_equal(first.splits[name], second.splits[name])
    all_edges = np.concatenate([first.splits[n] for n in ("train", "valid", "test")])
    assert len(all_edges) == 200


def test_ingest_bad_fractions(tmp_path):
    path = tmp_path / "e.txt"
    path.write_text("a b\n")
    with pytest.raises(ValueError):
        ingest(path, split_fractions=(0.5, 0.2, 0.2))


def test_ingest_presplit_shares_ids(tmp_path):
    (tmp_path / "train.txt").write_text("a r b\nb r c\n")
    (tmp_path / "valid.txt").write_text("a r c\n")
    (tmp_path / "test.txt").write_text("c s a\n")
    result = ingest_presplit(tmp_path / "train.txt", tmp_path / "valid.txt", tmp_path / "test.txt")
    assert result.meta.split_sizes == (2, 1, 1)
    assert result.meta.num_nodes == 3
    assert result.meta.num_relations == 2
    assert result.splits["test"].tolist() == [[2, 1, 0]]


def test_mapping_files(tmp_path):
    path = tmp_path / "edges.txt"
    path.write_text("a r1 b\nb r2 c\n")
    result = ingest(path, output_dir=tmp_path / "out")
    nodes = load_mapping(tmp_path / "out" / "node_mapping.txt")
    rels = load_mapping(tmp_path / "out" / "rel_mapping.txt")
    assert nodes == {"a": 0, "b": 1, "c": 2}
    assert rels == {"r1": 0, "r2": 1}
    assert result.meta.num_nodes == 3


def test_partition_sizes():
    six = partition_nodes(_meta(6), 2, seed=0)
    assert six.partition_offsets.tolist() == [0, 3, 6]
    seven = partition_nodes(_meta(7), 2, seed=0)
    assert seven.sizes.tolist() == [4, 3]
    assert sorted(seven.relabel.tolist()) == list(range(7))


def test_partition_errors():
    with pytest.raises(ValueError):
        partition_nodes(_meta(3), 4)


def test_partition_single_is_identity():
    one = partition_nodes(_meta(5), 1)
    assert one.relabel.tolist() == [0, 1, 2, 3, 4]
    assert one.node_to_partition.tolist() == [0] * 5


def test_bucket_definition():
    assignment = partition_nodes(_meta(6), 1)
    # force an identity relabel with two partitions
    assignment.partition_offsets = np.array([0, 3, 6])
    store = bucket_edges(np.array([[0, 0, 4]]), assignment)
    assert store.bucket_size(0, 1) == 1
    assert store.bucket(0, 1).tolist() == [[0, 0, 4]]


def test_bucket_is_partition_of_edges():
    edges = generate_synthetic_graph(40, 500, num_relations=2, skew=1.0, seed=3)
    meta = _meta(40, num_edges=len(edges), p=4, num_relations=2)
    assignment = partition_nodes(meta, 4, seed=5)
    store = bucket_edges(edges, assignment)
    assert int(store.bucket_sizes().sum()) == len(edges)
    relabeled = assignment.relabel_edges(edges)
    assert Counter(map(tuple, store.edges.tolist())) == Counter(map(tuple, relabeled.tolist()))
    for i in range(4):
        for j in range(4):
            bucket = store.bucket(i, j)
            assert np.all(assignment.partition_of(bucket[:, 0]) == i)
            assert np.all(assignment.partition_of(bucket[:, 2]) == j)


def test_bucket_unknown_endpoint():
    assignment = partition_nodes(_meta(3), 1)
    with pytest.raises(GraphFormatError):
        bucket_edges(np.array([[0, 0, 9]]), assignment)


def test_node_degrees():
    edges = np.array([[0, 0, 1], [0, 0, 2], [2, 0, 2]])
    assert node_degrees(edges, 4).tolist() == [2, 1, 3, 0]


def test_partition_round_trip(tmp_path):
    meta = _meta(7, p=2, d=3)
    store = GraphStore.create(tmp_path, meta)
    rows = meta.partition_rows(0)
    block = PartitionBlock(0, torch.randn(rows, 3), torch.rand(rows, 3))
    path = store.write_partition(0, block)
    loaded = store.read_partition(0)
    assert torch.equal(loaded.params, block.params)
    assert torch.equal(loaded.state, block.state)
    assert path.stat().st_size == 2 * rows * 3 * 4


def test_partition_size_checks(tmp_path):
    meta = _meta(7, p=2, d=3)
    store = GraphStore.create(tmp_path, meta)
    with pytest.raises(GraphFormatError):
        store.write_partition(0, PartitionBlock.zeros(0, 2, 3))
    store.write_partition(1, PartitionBlock.zeros(1, 3, 3))
    path = store.layout.partition_path(1)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(GraphFormatError):
        store.read_partition(1)


def test_partitions_concatenate_to_full_matrix(tmp_path):
    meta = _meta(10, p=3, d=2)
    store = GraphStore.create(tmp_path, meta)
    full = torch.arange(20, dtype=torch.float32).reshape(10, 2)
    offsets = meta.partition_offsets
    for k in range(3):
        rows = full[offsets[k]:offsets[k + 1]]
        store.write_partition(k, PartitionBlock(k, rows.clone(), torch.zeros_like(rows)))
    assert torch.equal(store.read_all_nodes().params, full)


def test_store_refuses_overwrite(tmp_path):
    GraphStore.create(tmp_path, _meta(4))
    with pytest.raises(FileExistsError):
        GraphStore.create(tmp_path, _meta(4))
    reopened = GraphStore.open(tmp_path)
    assert reopened.meta == _meta(4)


def test_edges_and_offsets_round_trip(tmp_path):
    edges = generate_synthetic_graph(20, 100, num_relations=2, seed=0)
    meta = _meta(20, num_edges=100, p=2, num_relations=2)
    bucketed = bucket_edges(edges, partition_nodes(meta, 2, seed=0))
    store = GraphStore.create(tmp_path, meta)
    store.write_bucket_store(bucketed)
    loaded = store.load_bucket_store()
    assert np.array_equal(loaded.edges, bucketed.edges)
    assert np.array_equal(loaded.offsets, bucketed.offsets)


def test_freebase_shaped_sizes():
    meta = GraphMeta(
        num_nodes=86_100_000,
        num_relations=14_800,
        num_edges=338_000_000,
        num_partitions=32,
        embedding_dim=100,
        split_sizes=(338_000_000, 0, 0),
    )
    assert meta.total_node_bytes() / 1e9 == pytest.approx(68.88, abs=0.01)
    assert meta.max_partition_bytes() / 1e9 == pytest.approx(2.15, abs=0.01)


def test_meta_rejects_bad_split():
    with pytest.raises(ValueError):
        GraphMeta(num_nodes=3, num_relations=1, num_edges=5, split_sizes=(1, 1, 1))


def test_preprocessing_is_deterministic(tmp_path):
    edges = generate_synthetic_graph(30, 120, seed=2)
    path = write_edge_list(edges, tmp_path / "g.tsv")

    def digest(out):
        result = ingest(path, split_fractions=(0.9, 0.05, 0.05), seed=11)
        meta = result.meta.with_partitions(3)
        store = GraphStore.create(out, meta)
        store.write_bucket_store(bucket_edges(result.splits["train"], partition_nodes(meta, 3, seed=4)))
        h = hashlib.sha256()
        h.update(store.layout.edges_path("train").read_bytes())
        h.update(store.layout.bucket_offsets_path.read_bytes())
        return h.hexdigest()

    assert digest(tmp_path / "one") == digest(tmp_path / "two")
