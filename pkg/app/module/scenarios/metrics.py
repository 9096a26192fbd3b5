import numpy as np

from app.core.errors import DataError, ShapeError
from app.module.scenarios.schemas import ForgettingReport, MetricLog


def localization_error(pred, truth):
    """Euclidean distance in meters between 3-D points; row-wise for (n, 3) inputs."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.shape[-1:] != (3,):
        raise ShapeError(f"Localization error needs matching 3-D coordinates, got {p.shape} and {t.shape}")
    distance = np.sqrt(np.sum((p - t) ** 2, axis=-1))
    return float(distance) if distance.ndim == 0 else distance


def forgetting_metrics(log: MetricLog) -> ForgettingReport:
    """F_u = current error minus best error so far, AF = mean F_u over units evaluated at least twice.

    Units evaluated once report F_u = 0 and do not enter the average.
    """
    if not log.records:
        raise DataError("Cannot compute forgetting on an empty metric log")
    per_unit: dict[str, float] = {}
    counted = []
    for unit in log.units():
        history = log.history(unit)
        per_unit[unit] = history[-1] - min(history)
        if len(history) >= 2:
            counted.append(per_unit[unit])
    average = float(np.mean(counted)) if counted else 0.0
    return ForgettingReport(per_unit=per_unit, average=average, units_counted=len(counted))


def old_unit_degradation(log: MetricLog) -> float:
    """Mean rise of error from a unit's first evaluation to its last, over units evaluated at least twice."""
    rises = [history[-1] - history[0] for history in (log.history(unit) for unit in log.units()) if len(history) >= 2]
    return float(np.mean(rises)) if rises else 0.0
