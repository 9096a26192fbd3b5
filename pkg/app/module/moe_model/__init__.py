from app.module.moe_model.checkpoint import load_model_checkpoint, model_from_payload, model_to_payload, param_report, save_model_checkpoint
from app.module.moe_model.losses import loss_ce, loss_dr, loss_total
from app.module.moe_model.model import ENCODER, PROJECTION, Expert, FusedOutput, MoEModel, expert_forward, expert_group
from app.module.moe_model.registry import ClassRegistry, Coords, RegionSpec
from app.module.moe_model.schemas import LabeledBatch, LossBreakdown, ModelConfig, Prediction

__all__ = [
    "ClassRegistry",
    "Coords",
    "ENCODER",
    "Expert",
    "FusedOutput",
    "LabeledBatch",
    "LossBreakdown",
    "MoEModel",
    "ModelConfig",
    "PROJECTION",
    "Prediction",
    "RegionSpec",
    "expert_forward",
    "expert_group",
    "load_model_checkpoint",
    "loss_ce",
    "loss_dr",
    "loss_total",
    "model_from_payload",
    "model_to_payload",
    "param_report",
    "save_model_checkpoint",
]
