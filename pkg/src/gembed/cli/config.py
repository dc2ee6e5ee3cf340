"""
Run configuration: packaged YAML defaults, presets, user file, --set overrides.
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..evaluation.evaluate import EvalSpec
from ..model.scoring import ModelKind
from ..ordering.generators import ORDERINGS, make_plan
from ..ordering.plan import OrderingPlan
from ..pipeline.config import StalenessConfig, TrainingHyper
from ..utils.errors import ConfigError
from ..utils.utils import load_yaml_file

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent / "default_config.yaml"
DATA_ROOT_ENV = "GEMBED_DATA_ROOT"
LOG_LEVEL_ENV = "GEMBED_LOG_LEVEL"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SyntheticSection(_Section):
    num_nodes: int = Field(default=10_000, ge=2)
    num_edges: int = Field(default=100_000, ge=1)
    num_relations: int = Field(default=1, ge=1)
    skew: float = Field(default=1.0, ge=0.0)
    num_communities: int = Field(default=10, ge=1)
    seed: int = 0


class DatasetSection(_Section):
    edge_file: Optional[str] = None
    train_file: Optional[str] = None
    valid_file: Optional[str] = None
    test_file: Optional[str] = None
    delimiter: Optional[str] = None
    column_order: Optional[Literal["srd", "sdr", "sd"]] = None
    split_fractions: Tuple[float, float, float] = (0.9, 0.05, 0.05)
    partition_seed: int = 0
    synthetic: SyntheticSection = SyntheticSection()

    @model_validator(mode="after")
    def _one_source(self) -> "DatasetSection":
        presplit = [self.train_file, self.valid_file, self.test_file]
        if any(presplit) and not all(presplit):
            raise ValueError("train_file, valid_file and test_file must be given together")
        if self.edge_file and any(presplit):
            raise ValueError("give either edge_file or the three pre-split files, not both")
        return self


class ModelSection(_Section):
    kind: ModelKind = ModelKind.DISTMULT
    embedding_dim: int = Field(default=100, ge=1)
    init_seed: int = 0

    @field_validator("kind", mode="before")
    @classmethod
    def _parse_kind(cls, value):
        return ModelKind.parse(value)


class TrainingSection(_Section):
    epochs: int = Field(default=10, ge=1)
    lr: float = Field(default=0.1, gt=0)
    eps: float = Field(default=1e-10, gt=0)
    batch_size: int = Field(default=10_000, ge=1)
    num_negatives: int = Field(default=1000, ge=0)
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    seed: int = 0


class StorageSection(_Section):
    backend: Literal["in_memory", "partitioned"] = "in_memory"
    num_partitions: int = Field(default=1, ge=1)
    buffer_capacity: int = Field(default=1, ge=1)
    ordering: str = "elimination"
    ordering_seed: int = 0
    prefetch: bool = True
    io_delay: float = Field(default=0.0, ge=0.0)

    @field_validator("ordering")
    @classmethod
    def _known_ordering(cls, value: str) -> str:
        value = value.lower()
        if value not in ORDERINGS or value == "sequential":
            raise ValueError(f"unknown training ordering {value!r}")
        return value


class PipelineSection(_Section):
    enabled: bool = True
    bound: int = Field(default=16, ge=1)
    loader_workers: int = Field(default=2, ge=1)
    update_workers: int = Field(default=2, ge=1)


class EvaluationSection(_Section):
    split: Literal["train", "valid", "test"] = "test"
    num_negatives: int = Field(default=1000, ge=0)
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    filtered: bool = False
    k_list: Tuple[int, ...] = (1, 5, 10)
    batch_size: int = Field(default=1000, ge=1)
    workers: int = Field(default=1, ge=1)
    seed: int = 0
    eval_every_epoch: bool = False


class CheckpointSection(_Section):
    every_epoch: bool = False


class RunConfig(_Section):
    """
    Fully resolved configuration of one command.

    in_memory storage keeps every node in one partition; partitioned storage needs
    p >= c >= 2.
    """

    dataset_dir: str = "./datasets/default"
    run_dir: str = "./runs/default"
    log_level: str = "INFO"
    show_progress: bool = True
    preset: Optional[str] = None
    dataset: DatasetSection = DatasetSection()
    model: ModelSection = ModelSection()
    training: TrainingSection = TrainingSection()
    storage: StorageSection = StorageSection()
    pipeline: PipelineSection = PipelineSection()
    evaluation: EvaluationSection = EvaluationSection()
    checkpoint: CheckpointSection = CheckpointSection()

    @model_validator(mode="after")
    def _check_invariants(self) -> "RunConfig":
        storage = self.storage
        if storage.backend == "in_memory" and storage.num_partitions != 1:
            raise ValueError(f"in_memory storage needs num_partitions = 1, got {storage.num_partitions}")
        if storage.backend == "partitioned":
            p, c = storage.num_partitions, storage.buffer_capacity
            if not p >= c >= 2:
                raise ValueError(f"partitioned storage needs p >= c >= 2, got p={p}, c={c}")
        if self.model.kind is ModelKind.COMPLEX and self.model.embedding_dim % 2:
            raise ValueError(f"ComplEx needs an even embedding_dim, got {self.model.embedding_dim}")
        return self

    @property
    def partitioned(self) -> bool:
        return self.storage.backend == "partitioned"

    def hyper(self) -> TrainingHyper:
        t = self.training
        return TrainingHyper(
            kind=self.model.kind,
            embedding_dim=self.model.embedding_dim,
            lr=t.lr,
            eps=t.eps,
            batch_size=t.batch_size,
            num_negatives=t.num_negatives,
            alpha=t.alpha,
            seed=t.seed,
        )

    def staleness(self) -> Optional[StalenessConfig]:
        """None selects the synchronous trainer."""
        if not self.pipeline.enabled:
            return None
        return StalenessConfig(
            bound=self.pipeline.bound,
            loader_workers=self.pipeline.loader_workers,
            update_workers=self.pipeline.update_workers,
        )

    def eval_spec(self) -> EvalSpec:
        e = self.evaluation
        return EvalSpec(
            num_negatives=e.num_negatives,
            alpha=e.alpha,
            filtered=e.filtered,
            k_list=e.k_list,
            seed=e.seed,
            batch_size=e.batch_size,
            workers=e.workers,
        )

    def plan(self) -> OrderingPlan:
        s = self.storage
        return make_plan(s.ordering, s.num_partitions, s.buffer_capacity, s.ordering_seed)

    def resolved_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def deep_merge(base: Mapping[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge `update` into a copy of `base`."""
    out = copy.deepcopy(dict(base))
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_overrides(overrides: Iterable[str]) -> Dict[str, Any]:
    """Turn ["training.lr=0.05", "storage.prefetch=false"] into a nested mapping."""
    out: Dict[str, Any] = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigError(f"override {item!r} has an empty key")
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} conflicts with another override")
        node[parts[-1]] = yaml.safe_load(raw) if raw.strip() else None
    return out


def _anchor(path: Optional[str], root: Optional[str]) -> Optional[str]:
    if path is None or root is None or Path(path).is_absolute():
        return path
    return str(Path(root) / path)


def load_run_config(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Iterable[str] = (),
    preset: Optional[str] = None,
) -> RunConfig:
    """
    Defaults <- preset <- user file <- --set overrides, validated into a RunConfig.

    Raises:
        ConfigError: Unknown preset, malformed override or invariant violation
        FileNotFoundError: config_path does not exist
    """
    load_dotenv()
    defaults = load_yaml_file(DEFAULT_CONFIG_PATH)
    presets = defaults.pop("presets", {}) or {}
    user = load_yaml_file(config_path) if config_path else {}
    cli = parse_overrides(overrides)

    name = preset or cli.get("preset") or user.get("preset")
    merged = defaults
    if name:
        if name not in presets:
            raise ConfigError(f"unknown preset {name!r}, expected one of {sorted(presets)}")
        merged = deep_merge(merged, presets[name])
        merged["preset"] = name
    merged = deep_merge(merged, user)
    if os.getenv(LOG_LEVEL_ENV):
        merged["log_level"] = os.environ[LOG_LEVEL_ENV]
    merged = deep_merge(merged, cli)
    if name:
        merged["preset"] = name

    root = os.getenv(DATA_ROOT_ENV)
    merged["dataset_dir"] = _anchor(merged.get("dataset_dir"), root)
    dataset = merged.get("dataset") or {}
    for key in ("edge_file", "train_file", "valid_file", "test_file"):
        dataset[key] = _anchor(dataset.get(key), root)

    try:
        config = RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration:\n{e}") from e
    logger.debug("resolved config: %s", config.resolved_dict())
    return config


def list_presets() -> List[str]:
    return sorted((load_yaml_file(DEFAULT_CONFIG_PATH).get("presets") or {}).keys())
