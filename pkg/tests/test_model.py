#!/usr/bin/env python3
"""
Tests for score functions, the loss and its gradients, negative sampling, Adagrad and initialization.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
import torch

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from gembed.graph import GraphMeta, GraphStore, complete_bipartite_edges
from gembed.model import (
    Adagrad,
    DegreeTable,
    ModelKind,
    NegativeSampleSpec,
    NodePool,
    ScoringBatch,
    adagrad_step,
    init_embeddings,
    init_scale,
    loss_and_grad,
    sample_negatives,
    score,
    write_initial_embeddings,
)
from gembed.utils.errors import NonFiniteScoreError

KINDS = [ModelKind.DOT, ModelKind.DISTMULT, ModelKind.COMPLEX]


def _random_batch(kind, seed, d=8, num_nodes=12, num_rels=3, B=5, n=4, dtype=torch.float64):
    g = torch.Generator().manual_seed(seed)
    node_emb = torch.randn(num_nodes, d, generator=g, dtype=dtype) * 0.5
    rel_emb = torch.randn(num_rels, d, generator=g, dtype=dtype) * 0.5
    return ScoringBatch(
        batch_id=seed,
        node_ids=torch.arange(num_nodes),
        node_emb=node_emb,
        rel_ids=torch.arange(num_rels),
        rel_emb=rel_emb,
        src=torch.randint(0, num_nodes, (B,), generator=g),
        rel=torch.randint(0, num_rels, (B,), generator=g),
        dst=torch.randint(0, num_nodes, (B,), generator=g),
        neg_dst=torch.randint(0, num_nodes, (n,), generator=g),
        neg_src=torch.randint(0, num_nodes, (n,), generator=g),
    )


def _finite_difference(kind, batch, tensor, h=1e-4):
    grad = torch.zeros_like(tensor)
    flat = tensor.view(-1)
    for idx in range(flat.numel()):
        old = flat[idx].item()
        flat[idx] = old + h
        up, _ = loss_and_grad(kind, batch)
        flat[idx] = old - h
        down, _ = loss_and_grad(kind, batch)
        flat[idx] = old
        grad.view(-1)[idx] = (up - down) / (2 * h)
    return grad


def test_score_examples():
    assert score("dot", torch.tensor([1.0, 2.0]), torch.tensor([9.0, 9.0]), torch.tensor([3.0, 4.0])) == 11
    s, d = torch.randn(6), torch.randn(6)
    ones = torch.ones(6)
    assert float(score(ModelKind.DISTMULT, s, ones, d)) == pytest.approx(float(score(ModelKind.DOT, s, ones, d)))


def test_complex_degenerates_to_distmult():
    s, r, d = torch.randn(4), torch.randn(4), torch.randn(4)
    s[2:], r[2:], d[2:] = 0, 0, 0
    expected = score(ModelKind.DISTMULT, s[:2], r[:2], d[:2])
    assert float(score(ModelKind.COMPLEX, s, r, d)) == pytest.approx(float(expected))


def test_complex_matches_complex_arithmetic():
    s, r, d = (torch.randn(6, dtype=torch.float64) for _ in range(3))
    to_c = lambda x: torch.complex(x[:3], x[3:])  # noqa: E731
    expected = (to_c(s) * to_c(r) * torch.conj(to_c(d))).sum().real
    assert float(score("complex", s, r, d)) == pytest.approx(float(expected))


def test_score_dimension_errors():
    with pytest.raises(ValueError):
        score("dot", torch.ones(3), torch.ones(3), torch.ones(4))
    with pytest.raises(ValueError):
        score("complex", torch.ones(3), torch.ones(3), torch.ones(3))
    with pytest.raises(ValueError):
        ModelKind.parse("transe")


def test_loss_single_class_is_zero():
    batch = _random_batch(ModelKind.DISTMULT, 0, B=1, n=0)
    loss, delta = loss_and_grad(ModelKind.DISTMULT, batch)
    assert loss == 0.0
    assert torch.count_nonzero(delta.node_grad) == 0


def test_loss_uniform_softmax():
    n = 7
    batch = _random_batch(ModelKind.DOT, 1, B=3, n=n)
    batch.node_emb.zero_()
    loss, _ = loss_and_grad(ModelKind.DOT, batch)
    assert loss == pytest.approx(2 * math.log(1 + n))


@pytest.mark.parametrize("kind", KINDS)
def test_gradients_match_finite_differences(kind):
    for trial in range(100):
        batch = _random_batch(kind, 1000 + trial)
        _, delta = loss_and_grad(kind, batch)
        for analytic, tensor in ((delta.node_grad, batch.node_emb), (delta.rel_grad, batch.rel_emb)):
            numeric = _finite_difference(kind, batch, tensor)
            scale = max(numeric.norm().item(), 1e-8)
            if kind is ModelKind.DOT and tensor is batch.rel_emb:
                assert analytic.norm().item() == 0
                continue
            assert (analytic - numeric).norm().item() / scale <= 1e-4


def test_loss_invariant_to_negative_order():
    batch = _random_batch(ModelKind.COMPLEX, 3, n=6)
    first, _ = loss_and_grad(ModelKind.COMPLEX, batch)
    batch.neg_dst = batch.neg_dst.flip(0)
    batch.neg_src = batch.neg_src.flip(0)
    second, _ = loss_and_grad(ModelKind.COMPLEX, batch)
    assert first == pytest.approx(second, rel=1e-12)


def test_non_finite_score_carries_batch_id():
    batch = _random_batch(ModelKind.DOT, 42)
    batch.node_emb[batch.src[0]] = float("inf")
    with pytest.raises(NonFiniteScoreError) as err:
        loss_and_grad(ModelKind.DOT, batch)
    assert err.value.batch_id == 42


def test_full_batch_training_separates_bipartite_edges():
    edges = torch.from_numpy(complete_bipartite_edges(10, 10))
    g = torch.Generator().manual_seed(0)
    node_emb = (torch.rand(20, 8, generator=g) - 0.5) * 0.5
    rel_emb = (torch.rand(1, 8, generator=g) - 0.5) * 0.5
    node_state, rel_state = torch.zeros_like(node_emb), torch.zeros_like(rel_emb)
    negatives = torch.arange(20)
    losses = []
    for step in range(50):
        batch = ScoringBatch(
            step, torch.arange(20), node_emb, torch.arange(1), rel_emb,
            edges[:, 0], edges[:, 1], edges[:, 2], negatives, negatives,
        )
        loss, delta = loss_and_grad(ModelKind.DISTMULT, batch)
        losses.append(loss)
        adagrad_step(node_emb, node_state, delta.node_ids, delta.node_grad, lr=0.1)
        adagrad_step(rel_emb, rel_state, delta.rel_ids, delta.rel_grad, lr=0.1)
    non_monotone = sum(1 for a, b in zip(losses, losses[1:]) if b >= a)
    assert non_monotone <= 5
    assert losses[-1] < losses[0]

    # pairs inside one side are never edges
    sides = (range(10), range(10, 20))
    same_side = torch.tensor([(a, b) for side in sides for a in side for b in side if a != b])
    pos = score(ModelKind.DISTMULT, node_emb[edges[:, 0]], rel_emb[edges[:, 1]], node_emb[edges[:, 2]])
    neg = score(
        ModelKind.DISTMULT, node_emb[same_side[:, 0]], rel_emb.expand(len(same_side), -1), node_emb[same_side[:, 1]]
    )
    assert pos.mean() > neg.mean()


def test_adagrad_examples():
    params, state = torch.zeros(1, 1), torch.zeros(1, 1)
    ids = torch.tensor([0])
    adagrad_step(params, state, ids, torch.zeros(1, 1), lr=0.1)
    assert params.item() == 0 and state.item() == 0

    adagrad_step(params, state, ids, torch.full((1, 1), 2.0), lr=0.1, eps=1e-10)
    assert params.item() == pytest.approx(-0.1, abs=1e-6)
    assert state.item() == 4

    params, state = torch.zeros(1, 1, dtype=torch.float64), torch.zeros(1, 1, dtype=torch.float64)
    for _ in range(2):
        adagrad_step(params, state, ids, torch.ones(1, 1, dtype=torch.float64), lr=0.1)
    assert params.item() == pytest.approx(-0.1 * (1 + 1 / math.sqrt(2)), abs=1e-6)


def test_adagrad_duplicate_rows_coalesce():
    params, state = torch.zeros(2, 1), torch.zeros(2, 1)
    adagrad_step(params, state, torch.tensor([1, 1]), torch.ones(2, 1), lr=0.1)
    assert state[1].item() == 4
    assert state[0].item() == 0


def test_adagrad_disjoint_updates_commute():
    g = torch.Generator().manual_seed(5)
    base, base_state = torch.randn(10, 4, generator=g), torch.rand(10, 4, generator=g)
    ids_a, ids_b = torch.tensor([0, 3, 5]), torch.tensor([1, 2, 9])
    grad_a, grad_b = torch.randn(3, 4, generator=g), torch.randn(3, 4, generator=g)

    p1, s1 = base.clone(), base_state.clone()
    adagrad_step(p1, s1, ids_a, grad_a, 0.1)
    adagrad_step(p1, s1, ids_b, grad_b, 0.1)
    p2, s2 = base.clone(), base_state.clone()
    adagrad_step(p2, s2, ids_b, grad_b, 0.1)
    adagrad_step(p2, s2, ids_a, grad_a, 0.1)
    assert torch.equal(p1, p2) and torch.equal(s1, s2)


def test_adagrad_optimizer_validates_and_matches_step():
    with pytest.raises(ValueError):
        Adagrad(lr=0.0)
    with pytest.raises(ValueError):
        Adagrad(eps=-1e-10)

    g = torch.Generator().manual_seed(9)
    base, base_state = torch.randn(6, 3, generator=g), torch.rand(6, 3, generator=g)
    ids, grad = torch.tensor([0, 2, 2, 5]), torch.randn(4, 3, generator=g)
    p1, s1 = base.clone(), base_state.clone()
    Adagrad(lr=0.3, eps=1e-8).step(p1, s1, ids, grad)
    p2, s2 = base.clone(), base_state.clone()
    adagrad_step(p2, s2, ids, grad, lr=0.3, eps=1e-8)
    assert torch.equal(p1, p2) and torch.equal(s1, s2)


def test_sampling_alpha_zero_is_uniform():
    spec = NegativeSampleSpec(n_t=100_000, alpha=0.0)
    table = DegreeTable.from_degrees([1000, 0, 0, 0])
    draws = sample_negatives(spec, table, NodePool.full(4), np.random.default_rng(0))
    counts = np.bincount(draws, minlength=4)
    # chi-square with 3 degrees of freedom, p=0.001 critical value 16.27
    expected = len(draws) / 4
    assert ((counts - expected) ** 2 / expected).sum() < 16.27


def test_sampling_equal_degrees_is_uniform():
    spec = NegativeSampleSpec(n_t=100_000, alpha=1.0)
    table = DegreeTable.from_degrees([3, 3, 3, 3, 3])
    draws = sample_negatives(spec, table, NodePool.full(5), np.random.default_rng(1))
    counts = np.bincount(draws, minlength=5)
    expected = len(draws) / 5
    # 4 degrees of freedom, p=0.001 critical value 18.47
    assert ((counts - expected) ** 2 / expected).sum() < 18.47


def test_sampling_degree_ratio():
    spec = NegativeSampleSpec(n_t=100_000, alpha=1.0)
    table = DegreeTable.from_degrees([9, 1])
    draws = sample_negatives(spec, table, NodePool.full(2), np.random.default_rng(2))
    share = float(np.mean(draws == 0))
    sigma = math.sqrt(0.9 * 0.1 / len(draws))
    assert abs(share - 0.9) < 3 * sigma


def test_sampling_respects_pool_and_split():
    spec = NegativeSampleSpec(n_t=10, alpha=0.35)
    assert spec.num_degree == 4 and spec.num_uniform == 6
    pool = NodePool([(10, 20), (40, 45)])
    table = DegreeTable(np.array([11, 12, 41, 99]))
    draws = sample_negatives(spec, table, pool, np.random.default_rng(3))
    assert len(draws) == 10
    assert pool.contains(draws).all()


def test_sampling_empty_pool():
    with pytest.raises(ValueError):
        sample_negatives(NegativeSampleSpec(n_t=3), DegreeTable(np.zeros(0, dtype=np.int64)), NodePool([]))


def _meta(num_nodes=1000, d=10, p=2):
    return GraphMeta(num_nodes=num_nodes, num_relations=5, num_edges=0, num_partitions=p,
                     embedding_dim=d, split_sizes=(0, 0, 0))


def test_init_range_and_state():
    parts, rels = init_embeddings(_meta(), seed=0)
    a = init_scale(10)
    for block in parts + [rels]:
        assert block.params.abs().max().item() <= a + 1e-7
        assert torch.count_nonzero(block.state) == 0
    assert sum(b.rows for b in parts) == 1000


def test_init_mean_close_to_zero():
    parts, _ = init_embeddings(_meta(num_nodes=100_000, d=10, p=1), seed=3)
    values = parts[0].params.double()
    a = init_scale(10)
    sigma = a / math.sqrt(3) / math.sqrt(values.numel())
    assert abs(values.mean().item()) < 3 * sigma


def test_init_files_are_deterministic(tmp_path):
    digests = []
    for name in ("a", "b"):
        store = GraphStore.create(tmp_path / name, _meta())
        write_initial_embeddings(store, seed=9)
        digests.append([store.layout.partition_path(k).read_bytes() for k in range(2)]
                       + [store.layout.relations_path.read_bytes()])
    assert digests[0] == digests[1]
