#!/usr/bin/env python3
"""
Tests for the run configuration and the preprocess / train / eval / simulate-ordering commands.
"""

import json
import sys
from pathlib import Path

import pandas as pd
import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from gembed.cli import cmd_simulate, load_run_config, main, parse_overrides
from gembed.graph import GraphStore
from gembed.ordering import make_plan
from gembed.utils import load_yaml_file
from gembed.utils.errors import ConfigError

SMALL = [
    "--no-progress",
    "--set", "model.embedding_dim=8",
    "--set", "dataset.synthetic.num_nodes=50",
    "--set", "dataset.synthetic.num_edges=600",
    "--set", "dataset.synthetic.num_relations=2",
    "--set", "dataset.synthetic.num_communities=5",
    "--set", "training.batch_size=50",
    "--set", "training.num_negatives=10",
    "--set", "training.epochs=2",
    "--set", "evaluation.num_negatives=20",
    "--set", "evaluation.batch_size=25",
]

PARTITIONED = [
    "--set", "storage.backend=partitioned",
    "--set", "storage.num_partitions=4",
    "--set", "storage.buffer_capacity=2",
]


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("GEMBED_DATA_ROOT", raising=False)
    monkeypatch.delenv("GEMBED_LOG_LEVEL", raising=False)


def _dirs(tmp_path, name):
    return ["--dataset-dir", str(tmp_path / "data" / name), "--run-dir", str(tmp_path / "runs" / name)]


def _preprocess(tmp_path, name, *extra):
    return main(["preprocess", "--synthetic", *_dirs(tmp_path, name), *SMALL, *extra])


# configuration


def test_overrides_are_parsed_as_yaml():
    nested = parse_overrides(["training.lr=0.05", "storage.prefetch=false", "evaluation.k_list=[1, 3]"])
    assert nested == {"training": {"lr": 0.05}, "storage": {"prefetch": False}, "evaluation": {"k_list": [1, 3]}}
    with pytest.raises(ConfigError):
        parse_overrides(["training.lr"])


def test_file_then_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("training:\n  lr: 0.2\n  epochs: 3\nmodel:\n  kind: dot\n")
    config = load_run_config(path, ["training.epochs=5"])
    assert config.training.lr == 0.2
    assert config.training.epochs == 5
    assert config.model.kind.value == "dot"
    assert config.training.batch_size == 10000


def test_preset_fills_benchmark_hyperparameters():
    config = load_run_config(preset="fb15k")
    assert config.model.kind.value == "complex"
    assert config.model.embedding_dim == 400
    assert config.training.epochs == 30
    assert config.evaluation.filtered
    assert config.preset == "fb15k"

    twitter = load_run_config(overrides=["preset=twitter"])
    assert twitter.partitioned
    assert twitter.plan().num_partitions == 16
    assert twitter.plan().capacity == 4


@pytest.mark.parametrize("overrides", [
    ["storage.num_partitions=2"],
    ["storage.backend=partitioned", "storage.num_partitions=4", "storage.buffer_capacity=1"],
    ["storage.backend=partitioned", "storage.num_partitions=2", "storage.buffer_capacity=3"],
    ["model.kind=complex", "model.embedding_dim=7"],
    ["storage.ordering=sequential"],
    ["training.unknown_key=1"],
    ["dataset.train_file=a.txt"],
])
def test_invariant_violations_rejected(overrides):
    with pytest.raises(ConfigError):
        load_run_config(overrides=overrides)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        load_run_config(preset="imagenet")


def test_data_root_anchors_relative_paths(monkeypatch, tmp_path):
    monkeypatch.setenv("GEMBED_DATA_ROOT", str(tmp_path))
    config = load_run_config(overrides=["dataset_dir=ds", "dataset.edge_file=raw/edges.tsv"])
    assert config.dataset_dir == str(tmp_path / "ds")
    assert config.dataset.edge_file == str(tmp_path / "raw" / "edges.tsv")


def test_resolved_config_round_trips():
    config = load_run_config(overrides=["training.seed=9", "pipeline.bound=1"])
    again = load_run_config(overrides=[f"{k}={v}" for k, v in [("training.seed", 9), ("pipeline.bound", 1)]])
    assert config.resolved_dict() == again.resolved_dict()
    assert config.staleness().bound == 1
    assert load_run_config(overrides=["pipeline.enabled=false"]).staleness() is None


# preprocess


def test_preprocess_small_file_into_four_buckets(tmp_path, capsys):
    raw = tmp_path / "edges.tsv"
    raw.write_text("\n".join([
        "a\tknows\tb", "b\tknows\tc", "c\tknows\td", "d\tknows\te",
        "e\tknows\tf", "f\tknows\ta", "a\tknows\td", "c\tknows\tf",
    ]) + "\n")
    code = main([
        "preprocess", *_dirs(tmp_path, "six"), "--no-progress",
        "--set", f"dataset.edge_file={raw}",
        "--set", "dataset.split_fractions=[1.0, 0.0, 0.0]",
        "--set", "model.embedding_dim=4",
        "--set", "storage.backend=partitioned",
        "--set", "storage.num_partitions=2",
        "--set", "storage.buffer_capacity=2",
    ])
    assert code == 0
    assert "✅" in capsys.readouterr().out

    store = GraphStore.open(tmp_path / "data" / "six")
    assert store.meta.num_nodes == 6
    assert store.meta.num_partitions == 2
    sizes = store.load_bucket_store().bucket_sizes()
    assert sizes.shape == (2, 2)
    assert sizes.sum() == 8
    assert len(store.read_bucket_offsets()) == 5
    manifest = json.loads((tmp_path / "data" / "six" / "manifest.json").read_text())
    assert manifest["command"] == "preprocess"
    assert manifest["outputs"]["buckets"] == "4"


def test_preprocess_refuses_to_overwrite(tmp_path, capsys):
    assert _preprocess(tmp_path, "toy") == 0
    assert _preprocess(tmp_path, "toy") == 1
    assert "--force" in capsys.readouterr().out
    assert _preprocess(tmp_path, "toy", "--force") == 0


def test_preprocess_without_input_is_a_user_error(tmp_path):
    assert main(["preprocess", *_dirs(tmp_path, "none"), "--no-progress"]) == 1


# train


def _checkpoint_bytes(run_dir: Path, epoch: int):
    folder = run_dir / "checkpoints" / f"epoch_{epoch}"
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir())}


def test_training_with_bound_one_is_reproducible(tmp_path):
    for name in ("a", "b"):
        assert _preprocess(tmp_path, name) == 0
        assert main([
            "train", *_dirs(tmp_path, name), *SMALL,
            "--staleness-bound", "1", "--seed", "7", "--set", "checkpoint.every_epoch=true",
        ]) == 0

    a, b = tmp_path / "runs" / "a", tmp_path / "runs" / "b"
    for epoch in (0, 1):
        assert _checkpoint_bytes(a, epoch) == _checkpoint_bytes(b, epoch)
    stats = pd.read_csv(a / "epoch_stats.csv")
    assert list(stats["epoch"]) == [0, 1]
    assert (stats["edges"] == GraphStore.open(tmp_path / "data" / "a").meta.num_train).all()
    assert (stats["max_staleness"] == 0).all()
    assert (a / "occupancy.csv").exists()
    timeline = pd.read_csv(a / "occupancy_timeline.csv")
    assert {"epoch", "time", "busy_compute", "queue_compute", "io_stall_seconds"} <= set(timeline.columns)
    assert set(timeline["epoch"]) == {0, 1}

    saved = load_yaml_file(a / "config.yaml")
    assert saved["pipeline"]["bound"] == 1
    assert saved["training"]["seed"] == 7
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["outputs"]["occupancy_timeline"] == "occupancy_timeline.csv"


def test_training_reduces_loss_and_evaluates_each_epoch(tmp_path):
    assert _preprocess(tmp_path, "toy") == 0
    assert main([
        "train", *_dirs(tmp_path, "toy"), *SMALL,
        "--epochs", "4", "--staleness-bound", "2", "--set", "evaluation.eval_every_epoch=true",
    ]) == 0
    stats = pd.read_csv(tmp_path / "runs" / "toy" / "epoch_stats.csv")
    assert stats["mean_loss"].iloc[-1] < stats["mean_loss"].iloc[0]
    assert stats["valid_mrr"].between(0, 1).all()


def test_partitioned_training_misses_match_plan(tmp_path):
    assert _preprocess(tmp_path, "p4", *PARTITIONED) == 0
    assert main([
        "train", *_dirs(tmp_path, "p4"), *SMALL, *PARTITIONED, "--staleness-bound", "2",
    ]) == 0
    plan = make_plan("elimination", 4, 2, seed=0)
    stats = pd.read_csv(tmp_path / "runs" / "p4" / "epoch_stats.csv")
    assert (stats["mode"] == "partitioned").all()
    assert (stats["buffer_misses"] == plan.swap_count).all()
    assert (stats["buffer_reads"] == plan.fill_count + plan.swap_count).all()


def test_training_rejects_mismatched_dataset(tmp_path):
    assert _preprocess(tmp_path, "toy") == 0
    before = GraphStore.open(tmp_path / "data" / "toy").read_all_nodes().params.clone()
    assert main(["train", *_dirs(tmp_path, "toy"), *SMALL, "--set", "model.embedding_dim=16"]) == 1
    assert main(["train", *_dirs(tmp_path, "toy"), *SMALL, *PARTITIONED]) == 1
    after = GraphStore.open(tmp_path / "data" / "toy").read_all_nodes().params
    assert (before == after).all()


def test_training_missing_dataset(tmp_path):
    assert main(["train", *_dirs(tmp_path, "missing"), *SMALL]) == 1


# eval


def test_eval_reports_and_threshold(tmp_path, capsys):
    assert _preprocess(tmp_path, "toy") == 0
    assert main(["train", *_dirs(tmp_path, "toy"), *SMALL, "--set", "checkpoint.every_epoch=true"]) == 0
    capsys.readouterr()

    assert main(["eval", *_dirs(tmp_path, "toy"), *SMALL, "--assert-mrr-min", "0.0"]) == 0
    assert "MRR" in capsys.readouterr().out
    report = pd.read_csv(tmp_path / "runs" / "toy" / "eval" / "eval_report.csv")
    assert 0 < report.loc[0, "mrr"] <= 1
    assert (tmp_path / "runs" / "toy" / "eval" / "rank_histogram.csv").exists()

    assert main(["eval", *_dirs(tmp_path, "toy"), *SMALL, "--assert-mrr-min", "1.01"]) == 1

    checkpoint = tmp_path / "runs" / "toy" / "checkpoints" / "epoch_0"
    assert main(["eval", *_dirs(tmp_path, "toy"), *SMALL, "--checkpoint", str(checkpoint), "--split", "valid"]) == 0
    assert main(["eval", *_dirs(tmp_path, "toy"), *SMALL, "--set", "model.embedding_dim=4"]) == 1


def test_filtered_eval_on_partitioned_dataset(tmp_path):
    assert _preprocess(tmp_path, "p4", *PARTITIONED) == 0
    assert main([
        "eval", *_dirs(tmp_path, "p4"), *SMALL, *PARTITIONED, "--set", "evaluation.filtered=true",
    ]) == 0
    report = pd.read_csv(tmp_path / "runs" / "p4" / "eval" / "eval_report.csv")
    assert bool(report.loc[0, "filtered"])


# simulate-ordering


def test_simulate_four_partitions_two_slots():
    frame = cmd_simulate([4], [2], kinds=["elimination", "hilbert"])
    swaps = dict(zip(frame["kind"], frame["swaps"]))
    assert swaps == {"elimination": 5, "hilbert": 9}
    assert set(frame["lower_bound"]) == {5}


def test_simulate_full_buffer_has_no_swaps():
    frame = cmd_simulate([6], [6], kinds=["elimination", "hilbert", "random"])
    assert (frame["swaps"] == 0).all()
    assert (frame["error"] == "").all()


def test_simulate_ratio_sweep():
    frame = cmd_simulate([8, 16, 32, 64, 128], capacity_fraction=0.25, kinds=["elimination"])
    assert list(frame["c"]) == [2, 4, 8, 16, 32]
    assert (frame["swaps"] == frame["elimination_formula"]).all()
    assert (frame["elimination_formula"] / frame["lower_bound"] <= 1.25).all()


def test_simulate_marks_invalid_rows():
    frame = cmd_simulate([3, 4], [2, 5], kinds=["elimination"])
    bad = frame[frame["c"] > frame["p"]]
    assert len(bad) == 2
    assert bad["error"].str.contains("exceeds").all()
    assert (frame[frame["c"] <= frame["p"]]["error"] == "").all()


def test_simulate_command_writes_csv_and_trace(tmp_path):
    out, trace = tmp_path / "sim.csv", tmp_path / "trace.csv"
    code = main([
        "simulate-ordering", "-p", "4", "8", "-c", "2", "--kind", "elimination", "hilbert",
        "--partition-bytes", "1000", "--output", str(out), "--trace", str(trace),
    ])
    assert code == 0
    frame = pd.read_csv(out)
    assert len(frame) == 4
    assert (frame["total_bytes"] == (frame["reads"] + frame["writes"]) * 1000).all()
    assert len(pd.read_csv(trace)) == len(make_plan("elimination", 4, 2).steps)
