from collections.abc import Callable, Mapping

import numpy as np
from pydantic import BaseModel

from app.core.errors import NumericError

LossFn = Callable[[Mapping[str, np.ndarray]], tuple[float, Mapping[str, np.ndarray]]]

FD_STEP = 1e-5
# Denominator floor of the error measure. Below it the check is absolute: |analytic - numeric| < tolerance * ABS_FLOOR.
ABS_FLOOR = 1e-4


class GradCheckReport(BaseModel):
    passed: bool
    max_relative_error: float
    worst_parameter: str | None = None
    checked_entries: int
    tolerance: float
    absolute_floor: float


def _loss_value(loss_fn: LossFn, params: Mapping[str, np.ndarray]) -> float:
    loss, _ = loss_fn(params)
    if not np.isfinite(loss):
        raise NumericError("Loss is not finite during gradient check")
    return float(loss)


def grad_check(
    loss_fn: LossFn,
    params: Mapping[str, np.ndarray],
    tolerance: float = 1e-4,
    max_entries_per_param: int | None = None,
    absolute_floor: float = ABS_FLOOR,
) -> GradCheckReport:
    """Compare analytic gradients with central differences, perturbing params in place.

    The error per entry is |a - n| / max(|a|, |n|, absolute_floor): relative for gradients above
    the floor, absolute (scaled by the floor) for smaller ones, where central differences carry
    rounding noise of order 1e-11.

    loss_fn(params) must return (loss, grads) and depend on params only. Every entry is
    restored after perturbation. max_entries_per_param subsamples large tensors (strided).
    """
    _, analytic = loss_fn(params)
    analytic = {name: np.array(value, copy=True) for name, value in analytic.items()}
    _loss_value(loss_fn, params)

    worst = 0.0
    worst_name = None
    checked = 0
    for name, param in params.items():
        grad = analytic[name]
        positions = list(np.ndindex(param.shape))
        if max_entries_per_param is not None and len(positions) > max_entries_per_param:
            positions = positions[:: max(1, len(positions) // max_entries_per_param)]
        for idx in positions:
            original = param[idx]
            param[idx] = original + FD_STEP
            plus = _loss_value(loss_fn, params)
            param[idx] = original - FD_STEP
            minus = _loss_value(loss_fn, params)
            param[idx] = original
            numeric = (plus - minus) / (2.0 * FD_STEP)
            a = grad[idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), absolute_floor)
            checked += 1
            if rel > worst:
                worst, worst_name = rel, f"{name}[{idx}]"

    return GradCheckReport(
        passed=worst < tolerance,
        max_relative_error=worst,
        worst_parameter=worst_name,
        checked_entries=checked,
        tolerance=tolerance,
        absolute_floor=absolute_floor,
    )
