"""
Training hyper-parameters and pipeline sizing.
"""

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..model.optimizer import Adagrad
from ..model.sampling import NegativeSampleSpec
from ..model.scoring import ModelKind


class TrainingHyper(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ModelKind = ModelKind.DISTMULT
    embedding_dim: int = Field(default=100, ge=1)
    lr: float = Field(default=0.1, gt=0)
    eps: float = Field(default=1e-10, gt=0)
    batch_size: int = Field(default=10_000, ge=1)
    num_negatives: int = Field(default=1000, ge=0)
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    seed: int = 0

    @field_validator("kind", mode="before")
    @classmethod
    def _parse_kind(cls, value):
        return ModelKind.parse(value)

    @model_validator(mode="after")
    def _check_dim(self) -> "TrainingHyper":
        if self.kind is ModelKind.COMPLEX and self.embedding_dim % 2:
            raise ValueError(f"ComplEx needs an even embedding_dim, got {self.embedding_dim}")
        return self

    @property
    def negative_spec(self) -> NegativeSampleSpec:
        return NegativeSampleSpec(n_t=self.num_negatives, alpha=self.alpha, seed=self.seed)

    @property
    def optimizer(self) -> Adagrad:
        return Adagrad(lr=self.lr, eps=self.eps)


class StalenessConfig(BaseModel):
    """
    Pipeline sizing.

    bound is the number of batches admitted but not yet retired. Queue capacities default
    to the bound, which is enough for every queue to accept a put without blocking forever.
    """

    model_config = ConfigDict(frozen=True)

    bound: int = Field(default=16, ge=1)
    loader_workers: int = Field(default=2, ge=1)
    update_workers: int = Field(default=2, ge=1)
    compute_workers: int = Field(default=1, ge=1, le=1)
    queue_capacity: int = Field(default=0, ge=0)

    @property
    def capacity(self) -> int:
        return self.queue_capacity or self.bound

    @classmethod
    def synchronous(cls) -> "StalenessConfig":
        return cls(bound=1, loader_workers=1, update_workers=1)
