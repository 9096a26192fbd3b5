import numpy as np

from app.core.errors import NumericError, RegistryError
from app.module.etf_gate.anchors import AnchorFrame
from app.module.moe_model.schemas import DrTarget

PROB_FLOOR = 1e-12


def dr_target_value(frame: AnchorFrame, dr_target: DrTarget = "paper") -> float:
    return 1.0 / np.sqrt(frame.r_max - 1) if dr_target == "paper" else 1.0


def _check_anchor_labels(labels: np.ndarray, frame: AnchorFrame) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= frame.r_max):
        raise RegistryError(f"Region label outside anchor frame of {frame.r_max}", details=f"labels {sorted(set(labels.tolist()))}")
    return labels


def loss_dr(z_hat: np.ndarray, region_labels, frame: AnchorFrame, dr_target: DrTarget = "paper") -> float:
    """Dot-regression alignment: (1/2N) sum (cos(z_hat_i, v_{r_i}) - target)^2."""
    labels = _check_anchor_labels(region_labels, frame)
    cos = np.sum(z_hat * frame.anchors[labels], axis=1)
    residual = cos - dr_target_value(frame, dr_target)
    return float(0.5 * np.mean(residual * residual))


def loss_ce(fused, global_labels) -> float:
    """Mean negative log of the fused probability at the true global class, floored at 1e-12."""
    probabilities = fused.probabilities if hasattr(fused, "probabilities") else np.asarray(fused)
    labels = np.asarray(global_labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= probabilities.shape[1]):
        raise RegistryError(f"Global label outside [0, {probabilities.shape[1]})")
    picked = probabilities[np.arange(labels.size), labels]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def loss_total(ce: float, dr: float, ce_weight: float = 1.0, dr_weight: float = 1.0) -> float:
    if not (np.isfinite(ce) and np.isfinite(dr)):
        raise NumericError(f"Non-finite loss terms: ce={ce}, dr={dr}")
    return float(ce_weight * ce + dr_weight * dr)
