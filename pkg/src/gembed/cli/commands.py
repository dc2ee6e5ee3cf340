"""
Implementation of the gembed subcommands.
"""

import logging
import math
from contextlib import nullcontext
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, Field
from tqdm import tqdm

from .. import __version__
from ..evaluation.evaluate import evaluate_split
from ..evaluation.metrics import EvalReport
from ..graph.ingest import ingest, ingest_presplit
from ..graph.meta import GraphMeta
from ..graph.prepare import prepare_dataset
from ..graph.storage import DatasetLayout, GraphStore
from ..graph.synthetic import generate_synthetic_graph, write_edge_list
from ..model.init import write_initial_embeddings
from ..ordering.generators import make_plan
from ..ordering.plan import simulate_io, swap_bound
from ..pipeline.occupancy import OccupancyRecorder, occupancy_report
from ..pipeline.partitioned import PartitionedTrainer
from ..pipeline.pipelined import train_epoch_pipelined
from ..pipeline.stats import EpochStats
from ..pipeline.storage import InMemoryStorage
from ..pipeline.sync import train_epoch_sync
from ..utils.errors import ConfigError, EvaluationError
from ..utils.utils import dump_json_file, dump_yaml_file, write_rows_csv
from .config import RunConfig

logger = logging.getLogger(__name__)


class RunManifest(BaseModel):
    command: str
    version: str = __version__
    created_at: str = Field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))
    dataset_dir: str
    preset: Optional[str] = None
    meta: Dict[str, Any] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)

    def write(self, path: Path) -> Path:
        return dump_json_file(self.model_dump(mode="json"), path)


def _progress(config: RunConfig, total: int, desc: str):
    if not config.show_progress:
        return nullcontext(None)
    return tqdm(total=total, desc=desc, unit="batch", leave=False)


def _start_run(config: RunConfig, command: str, meta: Optional[GraphMeta]) -> RunManifest:
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    dump_yaml_file(config.resolved_dict(), run_dir / "config.yaml")
    manifest = RunManifest(
        command=command,
        dataset_dir=str(config.dataset_dir),
        preset=config.preset,
        meta=meta.model_dump(mode="json") if meta is not None else {},
        outputs={"config": "config.yaml"},
    )
    manifest.write(run_dir / "manifest.json")
    return manifest


def _check_dataset(meta: GraphMeta, config: RunConfig) -> None:
    if meta.embedding_dim != config.model.embedding_dim:
        raise ConfigError(
            f"dataset was initialized with embedding_dim={meta.embedding_dim}, "
            f"config asks for {config.model.embedding_dim}"
        )
    if meta.num_partitions != config.storage.num_partitions:
        raise ConfigError(
            f"dataset has {meta.num_partitions} partitions, config asks for {config.storage.num_partitions}"
        )


# preprocess


def cmd_preprocess(config: RunConfig, force: bool = False, synthetic: bool = False) -> GraphStore:
    """Ingest raw edges, partition, bucket, initialize parameters and write a manifest."""
    layout = DatasetLayout(config.dataset_dir)
    if layout.exists() and not force:
        raise FileExistsError(f"Dataset already exists at {layout.root} (use --force to overwrite)")

    ds = config.dataset
    dim = config.model.embedding_dim
    if synthetic:
        syn = ds.synthetic
        print(f"🧪 Generating synthetic graph: {syn.num_nodes} nodes, {syn.num_edges} edges")
        edges = generate_synthetic_graph(
            syn.num_nodes, syn.num_edges, syn.num_relations, syn.skew, syn.num_communities, seed=syn.seed
        )
        raw = write_edge_list(edges, layout.root / "raw" / "synthetic_edges.txt")
        ingested = ingest(raw, split_fractions=ds.split_fractions, seed=ds.partition_seed, embedding_dim=dim)
    elif ds.train_file:
        print(f"📥 Ingesting pre-split files {ds.train_file}, {ds.valid_file}, {ds.test_file}")
        ingested = ingest_presplit(
            ds.train_file, ds.valid_file, ds.test_file,
            delimiter=ds.delimiter, embedding_dim=dim, column_order=ds.column_order,
        )
    elif ds.edge_file:
        print(f"📥 Ingesting {ds.edge_file}")
        ingested = ingest(
            ds.edge_file, delimiter=ds.delimiter, split_fractions=ds.split_fractions,
            seed=ds.partition_seed, embedding_dim=dim, column_order=ds.column_order,
        )
    else:
        raise ConfigError("no input edges: set dataset.edge_file or the three pre-split files, or pass --synthetic")

    p = config.storage.num_partitions
    store = prepare_dataset(ingested, layout.root, p, seed=ds.partition_seed, force=force)
    write_initial_embeddings(store, seed=config.model.init_seed)

    meta = store.meta
    RunManifest(
        command="preprocess",
        dataset_dir=str(layout.root),
        preset=config.preset,
        meta=meta.model_dump(mode="json"),
        outputs={
            "edges": ", ".join(layout.edges_path(s).name for s in ("train", "valid", "test")),
            "partitions": str(p),
            "buckets": str(p * p),
        },
    ).write(layout.root / "manifest.json")
    print(f"✅ Dataset ready at {layout.root}")
    print(f"   📊 {meta.num_nodes} nodes, {meta.num_relations} relations, splits {meta.split_sizes}")
    print(
        f"   📦 {p} partitions, {p * p} edge buckets, {meta.total_node_bytes() / 1e6:.1f} MB node "
        f"+ {meta.relation_bytes() / 1e6:.2f} MB relation parameters"
    )
    return store


# train


def _num_batches(store: GraphStore, config: RunConfig) -> int:
    b = config.training.batch_size
    if not config.partitioned:
        return math.ceil(store.meta.num_train / b)
    sizes = store.load_bucket_store().bucket_sizes().ravel()
    return int(sum(math.ceil(int(n) / b) for n in sizes))


def _validation(store: GraphStore, config: RunConfig, storage: Optional[InMemoryStorage]) -> Optional[EvalReport]:
    if store.meta.split_sizes[1] == 0:
        logger.warning("eval_every_epoch is set but the validation split is empty")
        return None
    if storage is None:
        return evaluate_split(store, "valid", config.eval_spec(), config.model.kind)
    return evaluate_split(
        store, "valid", config.eval_spec(), config.model.kind,
        nodes=storage.nodes.block.params, relations=storage.relations.block.params,
    )


def cmd_train(config: RunConfig) -> List[EpochStats]:
    """
    Train for config.training.epochs epochs and leave the final parameters in the dataset.

    Writes epoch_stats.csv, occupancy.csv (last epoch per stage), occupancy_timeline.csv
    (windowed busy fractions, queue depths and IO stalls of every epoch) and (optionally)
    checkpoints/epoch_<k>/ under run_dir.
    """
    store = GraphStore.open(config.dataset_dir)
    _check_dataset(store.meta, config)
    manifest = _start_run(config, "train", store.meta)
    run_dir = Path(config.run_dir)
    stats_path = run_dir / "epoch_stats.csv"
    timeline_path = run_dir / "occupancy_timeline.csv"
    for stale in (stats_path, timeline_path):
        if stale.exists():
            stale.unlink()

    hyper = config.hyper()
    staleness = config.staleness()
    total = _num_batches(store, config)
    mode = "partitioned" if config.partitioned else ("pipelined" if staleness else "sync")
    print(f"🚀 Training {hyper.kind.value} (d={hyper.embedding_dim}) on {store.meta.num_train} edges, {mode}")

    history: List[EpochStats] = []
    storage: Optional[InMemoryStorage] = None
    trainer: Optional[PartitionedTrainer] = None
    recorder = OccupancyRecorder()
    try:
        if config.partitioned:
            plan = config.plan()
            print(f"   🧭 {plan.kind} ordering p={plan.num_partitions} c={plan.capacity}: {plan.swap_count} swaps/epoch")
            trainer = PartitionedTrainer(
                store, hyper, plan, staleness, config.storage.prefetch, config.storage.io_delay
            )
        else:
            storage = InMemoryStorage.from_graph_store(store)

        for epoch in range(config.training.epochs):
            with _progress(config, total, f"epoch {epoch}") as bar:
                if trainer is not None:
                    stats = trainer.train_epoch(epoch, progress=bar)
                    recorder = trainer.recorder
                else:
                    recorder = OccupancyRecorder()
                    if staleness is None:
                        stats = train_epoch_sync(storage, hyper, epoch, recorder, bar)
                    else:
                        stats = train_epoch_pipelined(storage, hyper, staleness, epoch, recorder, bar)

            last = epoch == config.training.epochs - 1
            if storage is not None and (config.checkpoint.every_epoch or last):
                storage.save(store)
            if config.evaluation.eval_every_epoch:
                report = _validation(store, config, storage)
                stats.valid_mrr = report.mrr if report is not None else None
            if config.checkpoint.every_epoch:
                store.copy_parameters_to(run_dir / "checkpoints" / f"epoch_{epoch}")

            write_rows_csv([stats.as_row()], stats_path, append=True)
            timeline = recorder.timeline_frame()
            timeline.insert(0, "epoch", epoch)
            write_rows_csv(timeline.to_dict("records"), timeline_path, append=True)
            history.append(stats)
            line = f"   📊 epoch {epoch}: loss {stats.mean_loss:.4f}, {stats.edges_per_second:,.0f} edges/s"
            if stats.valid_mrr is not None:
                line += f", valid MRR {stats.valid_mrr:.4f}"
            print(line)
    finally:
        if trainer is not None:
            trainer.close()

    occupancy_report(recorder, run_dir / "occupancy.csv")
    manifest.outputs.update({
        "epoch_stats": stats_path.name,
        "occupancy": "occupancy.csv",
        "occupancy_timeline": timeline_path.name,
    })
    if config.checkpoint.every_epoch:
        manifest.outputs["checkpoints"] = "checkpoints"
    manifest.write(run_dir / "manifest.json")
    print(f"✅ Training finished, parameters written to {store.root}")
    return history


# eval


def cmd_eval(
    config: RunConfig,
    checkpoint: Optional[str] = None,
    split: Optional[str] = None,
    assert_mrr_min: Optional[float] = None,
) -> EvalReport:
    """Evaluate a split with the dataset's (or a checkpoint's) parameters and write the report."""
    store = GraphStore.open(config.dataset_dir)
    params = store
    if checkpoint is not None:
        params = GraphStore.open(checkpoint)
        mine, theirs = store.meta, params.meta
        if (theirs.num_nodes, theirs.num_relations) != (mine.num_nodes, mine.num_relations):
            raise EvaluationError(
                f"checkpoint has {theirs.num_nodes} nodes / {theirs.num_relations} relations, "
                f"dataset has {mine.num_nodes} / {mine.num_relations}"
            )
        if theirs.embedding_dim != config.model.embedding_dim:
            raise EvaluationError(
                f"checkpoint embedding_dim={theirs.embedding_dim}, config asks for {config.model.embedding_dim}"
            )
    elif store.meta.embedding_dim != config.model.embedding_dim:
        raise EvaluationError(
            f"dataset embedding_dim={store.meta.embedding_dim}, config asks for {config.model.embedding_dim}"
        )

    split = split or config.evaluation.split
    manifest = _start_run(config, "eval", store.meta)
    print(f"🔎 Evaluating {split} split ({'filtered' if config.evaluation.filtered else 'unfiltered'})")
    report = evaluate_split(store, split, config.eval_spec(), config.model.kind, params=params,
                            progress=config.show_progress)
    paths = report.write_csv(Path(config.run_dir) / "eval")
    manifest.outputs.update({name: str(path.relative_to(config.run_dir)) for name, path in paths.items()})
    manifest.write(Path(config.run_dir) / "manifest.json")
    print(f"📊 {report.summary()}")

    if assert_mrr_min is not None and report.mrr < assert_mrr_min:
        raise EvaluationError(f"MRR {report.mrr:.4f} is below the required {assert_mrr_min}")
    return report


# simulate-ordering


def simulate_rows(
    partitions: Sequence[int],
    capacities: Sequence[int],
    kinds: Sequence[str],
    seeds: Sequence[int],
    partition_bytes: int,
) -> List[Dict[str, Any]]:
    """One row per (p, c, kind, seed); invalid combinations carry an error instead of counts."""
    rows = []
    for p in partitions:
        for c in capacities:
            for kind in kinds:
                for seed in seeds:
                    row: Dict[str, Any] = {"p": p, "c": c, "kind": kind, "seed": seed}
                    try:
                        plan = make_plan(kind, p, c, seed)
                        io = simulate_io(plan, partition_bytes)
                        bound = swap_bound(p, c)
                    except ValueError as e:
                        row["error"] = str(e)
                        rows.append(row)
                        continue
                    row.update({
                        "swaps": plan.swap_count,
                        "fills": plan.fill_count,
                        **io.as_dict(),
                        "lower_bound": bound.lower_bound,
                        "elimination_formula": bound.elimination_count,
                        "swaps_over_lower_bound": plan.swap_count / bound.lower_bound if bound.lower_bound else 1.0,
                        "error": "",
                    })
                    rows.append(row)
    return rows


def cmd_simulate(
    partitions: Sequence[int],
    capacities: Optional[Sequence[int]] = None,
    capacity_fraction: Optional[float] = None,
    kinds: Iterable[str] = ("elimination", "hilbert"),
    seeds: Sequence[int] = (0,),
    partition_bytes: int = 1,
    output: Optional[str] = None,
    trace: Optional[str] = None,
) -> pd.DataFrame:
    """
    Swap counts and IO volume of every ordering over a (p, c) grid.

    capacity_fraction picks c = max(2, round(p * fraction)) per p instead of a fixed list.
    """
    kinds = list(kinds)
    if capacities is None and capacity_fraction is None:
        raise ConfigError("give capacities or a capacity fraction")
    rows: List[Dict[str, Any]] = []
    if capacity_fraction is not None:
        for p in partitions:
            c = max(2, round(p * capacity_fraction))
            rows += simulate_rows([p], [c], kinds, seeds, partition_bytes)
    else:
        rows = simulate_rows(partitions, capacities, kinds, seeds, partition_bytes)

    frame = pd.DataFrame(rows)
    if "error" not in frame.columns:
        frame["error"] = ""
    frame["error"] = frame["error"].fillna("")
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(output, index=False)
        print(f"✅ Wrote {len(frame)} rows to {output}")

    if trace:
        first = next((r for r in rows if not r.get("error")), None)
        if first is None:
            raise ConfigError("no valid configuration to trace")
        plan = make_plan(first["kind"], first["p"], first["c"], first["seed"])
        Path(trace).parent.mkdir(parents=True, exist_ok=True)
        plan.trace_frame().to_csv(trace, index=False)
        print(f"🧭 Trace of {first['kind']} p={first['p']} c={first['c']} written to {trace}")

    failed = int((frame["error"] != "").sum())
    if failed:
        print(f"⚠️  {failed} configuration(s) were invalid, see the error column")
    return frame
