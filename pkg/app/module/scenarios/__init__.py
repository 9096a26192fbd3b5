from app.module.scenarios.baseline import NaiveClassifier, naive_baseline_run
from app.module.scenarios.metrics import forgetting_metrics, localization_error, old_unit_degradation
from app.module.scenarios.planning import build_plan
from app.module.scenarios.reports import scenario_summary, write_metrics_csv, write_summary, write_sweep_csv
from app.module.scenarios.runner import (
    ExperimentCheckpoint,
    evaluate_units,
    latency_report,
    load_experiment_checkpoint,
    routing_share,
    run_scenario,
    save_experiment_checkpoint,
)
from app.module.scenarios.schemas import EvalRecord, ForgettingReport, Increment, MetricLog, ScenarioPlan, ScenarioResult, SweepRow, Track
from app.module.scenarios.sweep import granularity_sweep

__all__ = [
    "EvalRecord",
    "ExperimentCheckpoint",
    "ForgettingReport",
    "Increment",
    "MetricLog",
    "NaiveClassifier",
    "ScenarioPlan",
    "ScenarioResult",
    "SweepRow",
    "Track",
    "build_plan",
    "evaluate_units",
    "forgetting_metrics",
    "granularity_sweep",
    "latency_report",
    "load_experiment_checkpoint",
    "localization_error",
    "naive_baseline_run",
    "old_unit_degradation",
    "routing_share",
    "run_scenario",
    "save_experiment_checkpoint",
    "scenario_summary",
    "write_metrics_csv",
    "write_summary",
    "write_sweep_csv",
]
