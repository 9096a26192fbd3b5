from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from app.core.errors import DataError
from app.core.logger import logger
from app.core.utils import read_json, write_json
from app.module.etf_gate.anchors import AnchorFrame
from app.module.moe_model.model import Expert, MoEModel
from app.module.moe_model.registry import RegistryPayload
from app.module.moe_model.schemas import ModelConfig
from app.module.numkit.checkpoint import ArrayPayload, DensePayload, MlpPayload, decode_array, decode_dense, decode_mlp, encode_array, encode_dense, encode_mlp

MODEL_FORMAT = "moelo-model/1"


class FramePayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dim: int
    r_max: int
    seed: int
    anchors: ArrayPayload


class ExpertPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    region_id: int
    anchor_index: int
    frozen: bool
    seed: int
    net: MlpPayload


class ModelCheckpoint(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: str = MODEL_FORMAT
    config: ModelConfig
    frame: FramePayload
    encoder: MlpPayload
    projection: DensePayload
    experts: list[ExpertPayload]
    registry: RegistryPayload


def model_to_payload(model: MoEModel) -> ModelCheckpoint:
    frame = model.frame
    return ModelCheckpoint(
        config=model.config,
        frame=FramePayload(dim=frame.dim, r_max=frame.r_max, seed=frame.seed, anchors=encode_array(frame.anchors)),
        encoder=encode_mlp(model.encoder),
        projection=encode_dense(model.projection),
        experts=[
            ExpertPayload(region_id=e.region_id, anchor_index=e.anchor_index, frozen=e.frozen, seed=e.seed, net=encode_mlp(e.net, seed=e.seed))
            for e in model.experts
        ],
        registry=model.registry.to_payload(),
    )


def model_from_payload(payload: ModelCheckpoint) -> MoEModel:
    if payload.format != MODEL_FORMAT:
        raise DataError(f"Unsupported model checkpoint format: {payload.format}")
    anchors = decode_array(payload.frame.anchors)
    anchors.setflags(write=False)
    frame = AnchorFrame(dim=payload.frame.dim, r_max=payload.frame.r_max, seed=payload.frame.seed, anchors=anchors)
    model = MoEModel(payload.config, decode_mlp(payload.encoder), decode_dense(payload.projection), frame)

    specs = {spec.region_id: spec for spec in payload.registry.regions}
    for item in payload.experts:
        if item.region_id not in specs:
            raise DataError(f"Checkpoint expert for region {item.region_id} has no registry entry")
        expert = Expert(region_id=item.region_id, anchor_index=item.anchor_index, net=decode_mlp(item.net), seed=item.seed, frozen=item.frozen)
        model.attach_expert(expert, specs[item.region_id].local_classes())
    if [spec.region_id for spec in payload.registry.regions] != model.registry.regions:
        raise DataError("Checkpoint registry order does not match expert order")
    return model


def save_model_checkpoint(model: MoEModel, path: Path) -> Path:
    write_json(Path(path), model_to_payload(model).model_dump(mode="json"))
    logger.info(f"Model checkpoint written to {path}")
    return Path(path)


def load_model_checkpoint(path: Path) -> MoEModel:
    try:
        payload = ModelCheckpoint.model_validate(read_json(Path(path)))
    except ValidationError as e:
        raise DataError(f"Invalid model checkpoint {path}", details=str(e)) from e
    model = model_from_payload(payload)
    logger.info(f"Loaded model checkpoint {path}: {len(model.experts)} experts, {model.registry.n_classes} classes")
    return model


def param_report(model: MoEModel, reference: int = 86_904) -> dict:
    """Analytic parameter count and its relation to the published reference count.

    Only the encoder's first weight matrix depends on the input dimension D, so the
    reference implies D = (reference - fixed part) / encoder_hidden, which need not be integral.
    """
    total = model.param_count()
    hidden = model.config.encoder_hidden
    fixed = total - model.config.input_dim * hidden
    implied = (reference - fixed) / hidden
    return {
        "total": total,
        "input_dim": model.config.input_dim,
        "input_independent": fixed,
        "reference_total": reference,
        "implied_input_dim": implied,
        "implied_input_dim_is_integer": bool(np.isclose(implied, round(implied))),
        "note": "the reference count is not reproducible from the stated layer shapes for any integer input dimension"
        if not np.isclose(implied, round(implied))
        else "the reference count matches the stated layer shapes for the implied input dimension",
    }
