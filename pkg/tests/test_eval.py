#!/usr/bin/env python3
"""
Tests for ranking, metric aggregation and split evaluation.
"""

import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import torch

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from gembed.evaluation import (
    EmbeddingTable,
    EvalSpec,
    TrueTripleIndex,
    aggregate,
    evaluate_split,
    rank_batch,
    rank_edge,
    rank_histogram,
)
from gembed.graph import GraphMeta, IngestResult, generate_synthetic_graph, prepare_dataset
from gembed.model import write_initial_embeddings
from gembed.utils.errors import EvaluationError


def _table(rows):
    return EmbeddingTable.full(torch.tensor(rows, dtype=torch.float32))


def test_aggregate_example():
    report = aggregate([1, 2, 4], k_list=(1, 5, 10))
    assert report.mrr == pytest.approx(0.583333, abs=1e-6)
    assert report.hits[1] == pytest.approx(1 / 3)
    assert report.hits[5] == 1.0
    assert report.hits[10] == 1.0
    assert report.num_candidates == 3


def test_aggregate_all_first():
    report = aggregate([1] * 7)
    assert report.mrr == 1.0
    assert all(v == 1.0 for v in report.hits.values())


def test_aggregate_errors():
    with pytest.raises(EvaluationError):
        aggregate([])
    with pytest.raises(EvaluationError):
        aggregate([0, 1])


def test_hits_non_decreasing_in_k():
    ranks = np.random.default_rng(0).integers(1, 50, size=200)
    report = aggregate(ranks, k_list=(1, 3, 5, 10, 20, 50))
    values = [report.hits[k] for k in sorted(report.hits)]
    assert values == sorted(values)
    assert 0 < report.mrr <= 1


def test_rank_histogram_bins():
    histogram = rank_histogram(np.array([1, 1, 2, 3, 4, 10, 11, 100, 101, 5000]))
    assert histogram == {"1": 2, "2-3": 2, "4-10": 2, "11-100": 2, "101-1000": 1, ">1000": 1}


def test_positive_above_all_negatives_ranks_first():
    nodes = _table([[1, 0], [5, 0], [1, 0], [2, 0], [3, 0]])
    relations = torch.zeros(1, 2)
    assert rank_edge((0, 0, 1), "dst", np.array([2, 3, 4]), nodes, relations, "dot") == 1


def test_ties_count_against_positive():
    # positive scores 5, two negatives tie at 5, one scores 3
    nodes = _table([[1, 0], [5, 0], [5, 1], [5, -1], [3, 0]])
    relations = torch.zeros(1, 2)
    assert rank_edge((0, 0, 1), "dst", np.array([2, 3, 4]), nodes, relations, "dot") == 3


def test_own_endpoint_is_not_a_negative():
    nodes = _table([[1, 0], [5, 0], [1, 0]])
    relations = torch.zeros(1, 2)
    assert rank_edge((0, 0, 1), "dst", np.array([1, 2, 1]), nodes, relations, "dot") == 1


def test_filter_drops_true_object():
    # (0, plays-for, ?): node 1 is a known object, node 2 is the edge under test
    nodes = _table([[1, 0], [9, 0], [5, 0], [2, 0]])
    relations = torch.zeros(1, 2)
    index = TrueTripleIndex(np.array([[0, 0, 1], [0, 0, 2]]))
    everyone = np.arange(4)
    assert rank_edge((0, 0, 2), "dst", everyone, nodes, relations, "dot") == 2
    assert rank_edge((0, 0, 2), "dst", everyone, nodes, relations, "dot", index) == 1


def test_empty_negative_set_ranks_first(caplog):
    nodes = _table([[1, 0], [1, 0]])
    with caplog.at_level(logging.WARNING):
        assert rank_edge((0, 0, 1), "src", np.array([], dtype=np.int64), nodes, torch.zeros(1, 2), "dot") == 1
    assert "no negatives" in caplog.text


def test_unknown_side_rejected():
    with pytest.raises(ValueError):
        rank_edge((0, 0, 1), "middle", np.array([0]), _table([[1.0], [1.0]]), torch.zeros(1, 1), "dot")


@pytest.mark.parametrize("kind", ["dot", "distmult", "complex"])
def test_adding_negatives_never_lowers_rank(kind):
    g = torch.Generator().manual_seed(1)
    nodes = EmbeddingTable.full(torch.randn(30, 4, generator=g))
    relations = torch.randn(3, 4, generator=g)
    edges = np.array([[0, 1, 5], [3, 2, 7], [9, 0, 1]])
    negatives = np.random.default_rng(2).integers(0, 30, size=25)
    for side in ("dst", "src"):
        previous = rank_batch(edges, side, negatives[:1], nodes, relations, kind)
        for k in range(2, 26):
            ranks = rank_batch(edges, side, negatives[:k], nodes, relations, kind)
            assert np.all(ranks >= previous)
            previous = ranks


def _oracle_score(s, r, d):
    return sum(a * b * c for a, b, c in zip(s, r, d))


def test_toy_graph_matches_hand_computation():
    # DistMult on 6 nodes, 2 relations, 10 triples, scores computed with plain floats
    node_rows = [[1.0, 0.5], [0.5, 1.0], [-1.0, 0.25], [2.0, -0.5], [0.0, 1.5], [1.5, 1.5]]
    rel_rows = [[1.0, 1.0], [0.5, -1.0]]
    triples = np.array([
        [0, 0, 1], [0, 0, 3], [1, 0, 5], [2, 1, 4], [3, 1, 0],
        [4, 0, 5], [5, 1, 2], [1, 1, 3], [2, 0, 0], [5, 0, 4],
    ])
    nodes = _table(node_rows)
    relations = torch.tensor(rel_rows)
    index = TrueTripleIndex(triples)
    everyone = np.arange(6)
    known = {tuple(t) for t in triples.tolist()}

    expected = {True: [], False: []}
    for s, r, d in triples.tolist():
        positive = _oracle_score(node_rows[s], rel_rows[r], node_rows[d])
        for side in ("dst", "src"):
            for filtered in (False, True):
                rank = 1
                for n in range(6):
                    candidate = (s, r, n) if side == "dst" else (n, r, d)
                    if n == (d if side == "dst" else s):
                        continue
                    if filtered and candidate in known:
                        continue
                    if _oracle_score(node_rows[candidate[0]], rel_rows[r], node_rows[candidate[2]]) >= positive:
                        rank += 1
                expected[filtered].append((side, rank))

    for filtered in (False, True):
        got = []
        for edge in triples:
            for side in ("dst", "src"):
                got.append((side, rank_edge(edge, side, everyone, nodes, relations, "distmult",
                                            index if filtered else None)))
        assert got == expected[filtered]
        ranks = [rank for _, rank in got]
        oracle_mrr = sum(1.0 / rank for _, rank in expected[filtered]) / len(expected[filtered])
        assert aggregate(ranks).mrr == pytest.approx(oracle_mrr)


def test_filtered_never_worse_than_full_pool():
    g = torch.Generator().manual_seed(5)
    nodes = EmbeddingTable.full(torch.randn(40, 6, generator=g))
    relations = torch.randn(4, 6, generator=g)
    edges = generate_synthetic_graph(40, 300, num_relations=4, seed=5)
    index = TrueTripleIndex(edges)
    everyone = np.arange(40)
    for side in ("dst", "src"):
        raw = rank_batch(edges[:100], side, everyone, nodes, relations, "complex")
        filtered = rank_batch(edges[:100], side, everyone, nodes, relations, "complex",
                              index.exclusions(edges[:100], side))
        assert np.all(filtered <= raw)
    assert aggregate(filtered).mrr >= aggregate(raw).mrr


def _prepared(root, p):
    edges = generate_synthetic_graph(60, 600, num_relations=3, num_communities=3, seed=9)
    rng = np.random.default_rng(9)
    edges = edges[rng.permutation(len(edges))]
    splits = {"train": edges[:500], "valid": edges[500:550], "test": edges[550:]}
    meta = GraphMeta(num_nodes=60, num_relations=3, num_edges=600, num_partitions=1,
                     embedding_dim=6, split_sizes=(500, 50, 50))
    store = prepare_dataset(IngestResult(meta, splits), root, p, seed=1)
    write_initial_embeddings(store, seed=2)
    return store


def test_streamed_partitions_match_in_memory(tmp_path):
    store = _prepared(tmp_path / "ds", p=3)
    nodes = store.read_all_nodes().params
    for spec in (EvalSpec(num_negatives=20, alpha=0.5, seed=4, batch_size=16), EvalSpec(filtered=True)):
        streamed = evaluate_split(store, "test", spec, "distmult")
        in_memory = evaluate_split(store, "test", spec, "distmult", nodes=nodes)
        assert streamed.mrr == in_memory.mrr
        assert streamed.hits == in_memory.hits
        assert streamed.num_candidates == 100


def test_evaluation_is_deterministic(tmp_path):
    store = _prepared(tmp_path / "ds", p=2)
    spec = EvalSpec(num_negatives=25, alpha=0.3, seed=11, batch_size=7, workers=3)
    first = evaluate_split(store, "valid", spec, "complex")
    second = evaluate_split(store, "valid", spec, "complex")
    assert first.as_row() == second.as_row()
    assert first.histogram == second.histogram


def test_side_breakdown_averages_to_pooled(tmp_path):
    store = _prepared(tmp_path / "ds", p=1)
    report = evaluate_split(store, "test", EvalSpec(num_negatives=30), "dot")
    assert set(report.by_side) == {"dst", "src"}
    pooled = (report.by_side["dst"]["mrr"] + report.by_side["src"]["mrr"]) / 2
    assert report.mrr == pytest.approx(pooled)


def test_empty_split_is_an_error(tmp_path):
    edges = generate_synthetic_graph(10, 20, seed=0)
    meta = GraphMeta(num_nodes=10, num_relations=1, num_edges=20, num_partitions=1,
                     embedding_dim=2, split_sizes=(20, 0, 0))
    store = prepare_dataset(IngestResult(meta, {"train": edges, "valid": edges[:0], "test": edges[:0]}),
                            tmp_path / "ds", 1)
    write_initial_embeddings(store, seed=0)
    with pytest.raises(EvaluationError):
        evaluate_split(store, "test", EvalSpec(), "dot")
    with pytest.raises(EvaluationError):
        evaluate_split(store, "holdout", EvalSpec(), "dot")


def test_report_files(tmp_path):
    report = aggregate([1, 3, 12, 2])
    report.split = "test"
    paths = report.write_csv(tmp_path / "out")
    row = pd.read_csv(paths["report"])
    assert {"mrr", "hits@1", "hits@5", "hits@10", "candidates"} <= set(row.columns)
    assert row.loc[0, "candidates"] == 4
    histogram = pd.read_csv(paths["histogram"])
    assert histogram["count"].sum() == 4
    assert "MRR" in report.summary()


def test_eval_spec_validation():
    with pytest.raises(ValueError):
        EvalSpec(alpha=1.5)
    with pytest.raises(ValueError):
        EvalSpec(k_list=(0, 1))
    assert EvalSpec(k_list=(10, 1, 10)).k_list == (1, 10)
