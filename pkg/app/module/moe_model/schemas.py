from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.module.moe_model.registry import Coords

DrTarget = Literal["paper", "unity"]
LossName = Literal["CE", "DR"]


class ModelConfig(BaseModel):
    """Network shapes and loss settings. Shapes default to two encoder layers of 128/64 units,
    a 64 -> 64 projection and experts with one 128-unit hidden layer."""

    model_config = ConfigDict(extra="forbid")

    input_dim: int = Field(default=172, gt=0)
    encoder_hidden: int = Field(default=128, gt=0)
    latent_dim: int = Field(default=64, gt=0)
    expert_hidden: int = Field(default=128, gt=0)
    expert_dropout: float = Field(default=0.2, ge=0.0, lt=1.0)
    r_max: int = Field(default=6, ge=2)
    frame_seed: int | None = None
    dr_target: DrTarget = "paper"
    ce_weight: float = Field(default=1.0, ge=0.0)
    dr_weight: float = Field(default=1.0, ge=0.0)
    seed: int = 0


class LossBreakdown(BaseModel):
    ce: float
    dr: float
    total: float


class Prediction(BaseModel):
    global_class: int
    rp_id: int
    region_id: int
    expert_index: int
    coords: Coords
    gate_probability: float


@dataclass(frozen=True, eq=False)
class LabeledBatch:
    """Model-ready batch: scaled features, global class labels and anchor index per sample."""

    x: np.ndarray
    global_labels: np.ndarray
    anchor_labels: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]
