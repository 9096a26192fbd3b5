"""
Property suite behind `moelo check`: ETF geometry, analytic gradient fidelity and fused normalization.
"""

import numpy as np
from pydantic import BaseModel

from app.core.logger import logger
from app.module.etf_gate.anchors import FrameReport, frame_report, generate_etf
from app.module.moe_model.model import MoEModel
from app.module.moe_model.schemas import LabeledBatch, ModelConfig
from app.module.numkit.gradcheck import GradCheckReport, grad_check

NORM_TOLERANCE = 1e-12
COSINE_TOLERANCE = 1e-9
GRAD_TOLERANCE = 1e-4
FUSED_TOLERANCE = 1e-6


class GradientCase(BaseModel):
    losses: list[str]
    report: GradCheckReport


class DiagnosticsReport(BaseModel):
    frames: list[FrameReport]
    frames_ok: bool
    gradients: list[GradientCase]
    gradients_ok: bool
    fused_max_deviation: float
    fused_ok: bool

    @property
    def passed(self) -> bool:
        return self.frames_ok and self.gradients_ok and self.fused_ok


def toy_model(seed: int = 0, n_experts: int = 2) -> MoEModel:
    """Small network with experts of 2, 3, 2, ... local classes on a 4-anchor frame."""
    config = ModelConfig(input_dim=6, encoder_hidden=8, latent_dim=5, expert_hidden=7, r_max=4, seed=seed)
    model = MoEModel.build(config)
    rp = 0
    for region in range(n_experts):
        size = 3 if region % 2 else 2
        model.add_expert(region, [(rp + i, (float(rp + i), float(region), 0.0)) for i in range(size)])
        rp += size
    return model


def toy_batch(model: MoEModel, n: int = 4, seed: int = 0) -> LabeledBatch:
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % model.registry.n_classes
    regions = [model.registry.entry(int(c))[0] for c in labels]
    return LabeledBatch(
        x=rng.uniform(0.0, 1.0, size=(n, model.config.input_dim)),
        global_labels=labels,
        anchor_labels=np.asarray([model.anchor_of_region(r) for r in regions], dtype=np.int64),
    )


def check_gradients(model: MoEModel, batch: LabeledBatch, losses: tuple[str, ...], seed: int = 0) -> GradCheckReport:
    params = model.named_parameters()

    def loss_fn(_params):
        loss, grads = model.loss_and_grads(batch, losses=losses, seed=seed)
        return loss.total, grads

    return grad_check(loss_fn, params, tolerance=GRAD_TOLERANCE)


def fused_row_deviation(model: MoEModel, n: int = 1000, seed: int = 0) -> float:
    x = np.random.default_rng(seed).uniform(0.0, 1.0, size=(n, model.config.input_dim))
    fused = model.fused_forward(x, training=True, seed=seed)
    return float(np.max(np.abs(fused.probabilities.sum(axis=1) - 1.0)))


def run_property_suite(seed: int = 0, dim: int = 64, k_values: range = range(2, 17)) -> DiagnosticsReport:
    frames = [frame_report(generate_etf(k, dim, seed)) for k in k_values]
    frames_ok = all(f.max_norm_deviation <= NORM_TOLERANCE and f.max_cosine_deviation <= COSINE_TOLERANCE for f in frames)

    model = toy_model(seed)
    batch = toy_batch(model, seed=seed)
    gradients = [GradientCase(losses=list(losses), report=check_gradients(model, batch, losses, seed)) for losses in (("DR",), ("CE",), ("CE", "DR"))]
    gradients_ok = all(case.report.passed for case in gradients)

    deviation = fused_row_deviation(toy_model(seed, n_experts=3), seed=seed)
    report = DiagnosticsReport(
        frames=frames,
        frames_ok=frames_ok,
        gradients=gradients,
        gradients_ok=gradients_ok,
        fused_max_deviation=deviation,
        fused_ok=deviation <= FUSED_TOLERANCE,
    )
    logger.info(f"Property suite: frames {'ok' if frames_ok else 'FAILED'}, gradients {'ok' if gradients_ok else 'FAILED'}, fused rows {'ok' if report.fused_ok else 'FAILED'}")
    return report
