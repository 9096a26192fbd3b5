from pathlib import Path

import pandas as pd

from app.core.logger import logger
from app.core.utils import write_json
from app.module.moe_model.checkpoint import param_report
from app.module.scenarios.metrics import forgetting_metrics, old_unit_degradation
from app.module.scenarios.schemas import LatencyReport, MetricLog, ScenarioResult, SweepRow

METRIC_COLUMNS = ["step", "mode", "unit_type", "unit_id", "le_mean_m", "le_worst_m", "n_test"]


def metrics_frame(log: MetricLog) -> pd.DataFrame:
    rows = [{column: getattr(record, column) for column in METRIC_COLUMNS} for record in log.records]
    frame = pd.DataFrame(rows, columns=METRIC_COLUMNS)
    frame["mode"] = [str(mode) if mode is not None else "" for mode in frame["mode"]]
    return frame


def write_metrics_csv(log: MetricLog, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metrics_frame(log).to_csv(path, index=False, float_format=lambda v: repr(float(v)), lineterminator="\n", encoding="utf-8")
    logger.info(f"Wrote {len(log)} metric rows to {path}")
    return path


def scenario_summary(
    result: ScenarioResult,
    latency: LatencyReport | None = None,
    naive_log: MetricLog | None = None,
    routing: dict[str, float] | None = None,
) -> dict:
    forgetting = forgetting_metrics(result.log)
    steps = result.log.steps()
    summary = {
        "track": result.plan.track.display_name,
        "building": result.plan.building,
        "seed": result.seed,
        "n_rp": result.plan.n_rp,
        "region_count": result.plan.region_count,
        "steps": [increment.label for increment in result.plan.increments],
        "average_forgetting_m": forgetting.average,
        "forgetting_per_unit_m": forgetting.per_unit,
        "old_unit_degradation_m": old_unit_degradation(result.log),
        "mean_le_per_step_m": {str(step): result.log.step_mean(step) for step in steps},
        "final_mean_le_m": result.log.step_mean(steps[-1]),
        "parameters": param_report(result.model),
        "wall_clock_s": {t.label: t.seconds for t in result.timings},
        "final_epoch_loss": {inc.label: report.final_loss.model_dump() for inc, report in zip(result.plan.increments, result.reports)},
        "replay_prototypes": len(result.buffer),
    }
    if latency is not None:
        summary["latency_ms"] = latency.model_dump()
    if routing is not None:
        summary["routing_share_per_region"] = routing
    if naive_log is not None:
        naive = forgetting_metrics(naive_log)
        summary["naive_baseline"] = {
            "average_forgetting_m": naive.average,
            "forgetting_per_unit_m": naive.per_unit,
            "old_unit_degradation_m": old_unit_degradation(naive_log),
            "final_mean_le_m": naive_log.step_mean(naive_log.steps()[-1]),
        }
    return summary


def sweep_frame(rows: list[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in rows], columns=["n_rp", "region_count", "final_mean_le_m", "steps"])


def write_sweep_csv(rows: list[SweepRow], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sweep_frame(rows).to_csv(path, index=False, float_format=lambda v: repr(float(v)), lineterminator="\n", encoding="utf-8")
    logger.info(f"Wrote sweep table to {path}")
    return path


def write_summary(summary: dict, path: Path) -> Path:
    write_json(Path(path), summary)
    logger.info(f"Wrote summary to {path}")
    return Path(path)
