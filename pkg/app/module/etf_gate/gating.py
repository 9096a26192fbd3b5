from collections.abc import Sequence
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.core.errors import ShapeError, StateError
from app.module.etf_gate.anchors import AnchorFrame
from app.module.numkit.functional import Matrix, softmax, softmax_rows

GateMode = Literal["soft", "hard"]


class GateOutput(BaseModel):
    model_config = ConfigDict(frozen=True)

    scores: list[float]
    probabilities: list[float]
    selected: int | None = None


def _active_anchors(frame: AnchorFrame, active: Sequence[int]) -> np.ndarray:
    if len(active) == 0:
        raise StateError("Gating needs at least one active anchor")
    for index in active:
        if not 0 <= index < frame.r_max:
            raise StateError(f"Anchor index {index} outside frame of {frame.r_max}")
    return frame.anchors[list(active)]


def cosine_scores(z_hat, frame: AnchorFrame, active: Sequence[int]) -> np.ndarray:
    """Cosines of a normalized projection against the active anchors, in active order."""
    anchors = _active_anchors(frame, active)
    z = np.asarray(z_hat, dtype=np.float64)
    if z.shape != (frame.dim,):
        raise ShapeError(f"z_hat must have shape ({frame.dim},), got {z.shape}")
    return np.clip(anchors @ z, -1.0, 1.0)


def gate(z_hat, frame: AnchorFrame, active: Sequence[int], mode: GateMode = "soft") -> GateOutput:
    """Softmax over active cosines (temperature 1); hard mode also picks the argmax, lowest index on ties."""
    scores = cosine_scores(z_hat, frame, active)
    probabilities = softmax(scores)
    selected = int(np.argmax(probabilities)) if mode == "hard" else None
    return GateOutput(scores=scores.tolist(), probabilities=probabilities.tolist(), selected=selected)


def gate_batch(z_hat: Matrix, frame: AnchorFrame, active: Sequence[int]) -> tuple[Matrix, Matrix, np.ndarray]:
    """Batched gating: (cosine scores, soft probabilities, hard selection) per row."""
    anchors = _active_anchors(frame, active)
    if z_hat.ndim != 2 or z_hat.shape[1] != frame.dim:
        raise ShapeError(f"z_hat rows must have width {frame.dim}, got shape {z_hat.shape}")
    scores = np.clip(z_hat @ anchors.T, -1.0, 1.0)
    probabilities = softmax_rows(scores)
    return scores, probabilities, np.argmax(probabilities, axis=1)
