from app.module.continual.planning import plan_baseline, plan_increment
from app.module.continual.replay import (
    MixedBatch,
    ReplayBuffer,
    ReplayBufferPayload,
    ReplayEntry,
    TrainingPool,
    compose_batch,
    herding_select,
    update_replay,
)
from app.module.continual.schemas import EpochLoss, IncrementMode, TrainConfig, TrainingReport, TrainPlan
from app.module.continual.trainer import train_increment, training_pool

__all__ = [
    "EpochLoss",
    "IncrementMode",
    "MixedBatch",
    "ReplayBuffer",
    "ReplayBufferPayload",
    "ReplayEntry",
    "TrainConfig",
    "TrainPlan",
    "TrainingPool",
    "TrainingReport",
    "compose_batch",
    "herding_select",
    "plan_baseline",
    "plan_increment",
    "train_increment",
    "training_pool",
    "update_replay",
]
