from enum import StrEnum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from app.module.moe_model.registry import RegionSpec
from app.module.moe_model.schemas import LossName

ParameterGroup = Literal["encoder", "projection", "new_expert"]


class IncrementMode(StrEnum):
    DIL = "DIL"
    CIL = "CIL"
    CDIL = "CDIL"


class TrainPlan(BaseModel):
    """What one training step may touch. `new_expert` covers every expert this step adds."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: IncrementMode
    trainable: frozenset[ParameterGroup]
    losses: frozenset[LossName]
    new_regions: tuple[RegionSpec, ...] = ()
    baseline: bool = False

    @property
    def has_new_region(self) -> bool:
        return bool(self.new_regions)


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    batch_size: int = Field(default=64, ge=1)
    epochs: int = Field(default=50, ge=1)
    replay_fraction: float = Field(default=0.25, ge=0.0, lt=1.0)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    per_pair_capacity: int = Field(default=1, ge=1)
    cil_train_gate: bool = False
    seed: int = 0

    @property
    def replay_per_batch(self) -> int:
        return int(self.replay_fraction * self.batch_size)


class EpochLoss(BaseModel):
    epoch: int
    ce: float
    dr: float
    total: float
    batches: int


class TrainingReport(BaseModel):
    mode: IncrementMode
    baseline: bool
    new_regions: list[int]
    trainable_groups: list[str]
    n_samples: int
    epochs: list[EpochLoss]

    @property
    def final_loss(self) -> EpochLoss:
        return self.epochs[-1]
