"""
Scenario execution: train each increment, refresh replay, then evaluate every unit seen so far.
"""

import time
from pathlib import Path
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from app.core.errors import ConfigError, DataError
from app.core.logger import logger
from app.core.performance import PerformanceMetrics, performance_timer
from app.core.utils import derive_seed, read_json, write_json
from app.module.continual.planning import plan_baseline, plan_increment
from app.module.continual.replay import ReplayBuffer, ReplayBufferPayload, update_replay
from app.module.continual.schemas import IncrementMode, TrainConfig, TrainingReport
from app.module.continual.trainer import train_increment
from app.module.fingerprints.dataset import FingerprintDataset, Pair
from app.module.moe_model.checkpoint import ModelCheckpoint, model_from_payload, model_to_payload
from app.module.moe_model.model import MoEModel
from app.module.moe_model.registry import ClassRegistry, RegionSpec
from app.module.moe_model.schemas import ModelConfig
from app.module.scenarios.metrics import localization_error
from app.module.scenarios.schemas import EvalRecord, LatencyReport, MetricLog, ScenarioPlan, ScenarioResult, StepTiming, UnitType

EXPERIMENT_FORMAT = "moelo-experiment/1"
LATENCY_METRIC = "predict_location"


class Localizer(Protocol):
    registry: ClassRegistry

    def predict_batch(self, x) -> np.ndarray: ...


class ExperimentCheckpoint(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: str = EXPERIMENT_FORMAT
    plan: ScenarioPlan
    seed: int
    completed_step: int
    seen_pairs: list[tuple[str, int]]
    model: ModelCheckpoint
    replay: ReplayBufferPayload
    log: MetricLog
    reports: list[TrainingReport]
    timings: list[StepTiming]


def save_experiment_checkpoint(checkpoint: ExperimentCheckpoint, path: Path) -> Path:
    return write_json(Path(path), checkpoint.model_dump(mode="json"))


def load_experiment_checkpoint(path: Path) -> ExperimentCheckpoint:
    try:
        checkpoint = ExperimentCheckpoint.model_validate(read_json(Path(path)))
    except ValidationError as e:
        raise DataError(f"Invalid experiment checkpoint {path}", details=str(e)) from e
    if checkpoint.format != EXPERIMENT_FORMAT:
        raise DataError(f"Unsupported experiment checkpoint format: {checkpoint.format}")
    return checkpoint


def scenario_model_config(model_config: ModelConfig, plan: ScenarioPlan, n_aps: int, seed: int) -> ModelConfig:
    """Input width from the data, enough anchors for every region, weights seeded from the run seed."""
    r_max = max(model_config.r_max, plan.region_count)
    if r_max != model_config.r_max:
        logger.info(f"Raising r_max from {model_config.r_max} to {r_max} for {plan.region_count} regions")
    return model_config.model_copy(update={"input_dim": n_aps, "r_max": r_max, "seed": derive_seed(seed, "model")})


def region_specs(dataset: FingerprintDataset) -> dict[int, RegionSpec]:
    return {region_id: dataset.region_spec(region_id) for region_id in dataset.regions()}


def evaluate_units(
    model: Localizer,
    test: FingerprintDataset,
    seen_pairs: list[Pair],
    unit_type: UnitType,
    step: int,
    label: str,
    mode: IncrementMode | None,
) -> list[EvalRecord]:
    """One record per seen unit, over the test fingerprints of the pairs trained so far."""
    seen = set(seen_pairs)
    rows = np.flatnonzero([(str(d), int(r)) in seen for d, r in zip(test.device_ids, test.region_ids)])
    if rows.size == 0:
        raise DataError(f"{label}: no test fingerprints for the pairs seen so far")
    subset = test.take(rows)
    coords = np.asarray(model.registry.coords_table(), dtype=np.float64)
    errors = localization_error(coords[model.predict_batch(subset.features())], subset.coords)

    position = 0 if unit_type == "device" else 1
    units = list(dict.fromkeys(pair[position] for pair in seen_pairs))
    keys = subset.device_ids.astype(str) if unit_type == "device" else subset.region_ids
    records = []
    for unit in units:
        unit_errors = errors[keys == unit]
        if unit_errors.size == 0:
            logger.warning(f"{label}: {unit_type} {unit} has no test fingerprints")
            continue
        records.append(
            EvalRecord(
                step=step,
                label=label,
                mode=mode,
                unit_type=unit_type,
                unit_id=str(unit),
                le_mean_m=float(unit_errors.mean()),
                le_worst_m=float(unit_errors.max()),
                n_test=int(unit_errors.size),
            )
        )
    return records


def run_scenario(
    plan: ScenarioPlan,
    train: FingerprintDataset,
    test: FingerprintDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    seed: int,
    checkpoint_path: Path | None = None,
    resume: ExperimentCheckpoint | None = None,
    metrics: PerformanceMetrics | None = None,
) -> ScenarioResult:
    metrics = metrics or PerformanceMetrics()
    specs = region_specs(FingerprintDataset.concat([train, test]))
    if resume is not None:
        if resume.plan != plan or resume.seed != seed:
            raise ConfigError("The experiment checkpoint was written for a different plan or seed")
        model = model_from_payload(resume.model)
        buffer = ReplayBuffer.from_payload(resume.replay)
        log = resume.log.model_copy(deep=True)
        reports = list(resume.reports)
        timings = list(resume.timings)
        seen_pairs = [tuple(p) for p in resume.seen_pairs]
        completed = resume.completed_step
        logger.info(f"Resuming {plan.track.display_name} after step {completed}")
    else:
        model = MoEModel.build(scenario_model_config(model_config, plan, train.n_aps, seed))
        buffer = ReplayBuffer(train_config.per_pair_capacity)
        log, reports, timings, seen_pairs, completed = MetricLog(), [], [], [], 0

    for step, increment in enumerate(plan.increments, start=1):
        if step <= completed:
            continue
        new_data = train.select(devices=increment.devices, regions=increment.regions)
        if len(new_data) == 0:
            raise DataError(f"{increment.label}: no training data for devices {increment.devices} x regions {increment.regions}")
        try:
            new_specs = [specs[r] for r in increment.new_regions]
        except KeyError as e:
            raise DataError(f"{increment.label}: region {e.args[0]} has no fingerprints") from None
        if increment.baseline:
            train_plan = plan_baseline(increment.mode, new_specs)
        else:
            train_plan = plan_increment(increment.mode, new_specs, cil_train_gate=train_config.cil_train_gate)
        cfg = train_config.model_copy(update={"seed": derive_seed(seed, f"train:{step}")})

        name = f"{plan.track.value}:{increment.label}"
        with performance_timer(name, metrics):
            reports.append(train_increment(model, train_plan, new_data, buffer, cfg))
        timings.append(StepTiming(step=step, label=increment.label, seconds=metrics.metrics[name][-1]["value"]))

        update_replay(buffer, model, new_data)
        seen_pairs.extend(pair for pair in new_data.pairs() if pair not in seen_pairs)
        records = evaluate_units(model, test, seen_pairs, plan.unit_type, step, increment.label, increment.mode)
        log.add(records)
        logger.info(f"{increment.label}: mean LE {log.step_mean(step):.3f} m over {len(records)} {plan.unit_type}s")

        if checkpoint_path is not None:
            save_experiment_checkpoint(
                ExperimentCheckpoint(
                    plan=plan,
                    seed=seed,
                    completed_step=step,
                    seen_pairs=seen_pairs,
                    model=model_to_payload(model),
                    replay=buffer.to_payload(),
                    log=log,
                    reports=reports,
                    timings=timings,
                ),
                checkpoint_path,
            )

    return ScenarioResult(plan=plan, seed=seed, log=log, reports=reports, timings=timings, model=model, buffer=buffer)


def latency_report(model: MoEModel, test: FingerprintDataset, max_calls: int = 200, metrics: PerformanceMetrics | None = None) -> LatencyReport:
    """Wall-clock of single-fingerprint predictions on this machine, recorded as `predict_location` in ms."""
    features = test.features()[:max_calls]
    if features.shape[0] == 0:
        raise DataError("No test fingerprints to time")
    metrics = metrics or PerformanceMetrics()
    for row in features:
        start = time.perf_counter()
        model.predict_location(row)
        metrics.record_metric(LATENCY_METRIC, (time.perf_counter() - start) * 1000.0, unit="ms")
    calls = metrics.get_summary()[LATENCY_METRIC]
    return LatencyReport(calls=calls["count"], mean_ms=metrics.get_average(LATENCY_METRIC), max_ms=calls["max"])


def routing_share(model: MoEModel, test: FingerprintDataset) -> dict[str, float]:
    """Per known region, the share of its test fingerprints hard-gated to that region's own expert."""
    known = np.isin(test.region_ids, model.registry.regions)
    if not known.any():
        raise DataError("No test fingerprints from regions the model knows")
    subset = test.take(np.flatnonzero(known))
    selected = model.fused_forward(subset.features(), training=False).selected
    routed = np.asarray([model.experts[k].region_id for k in selected], dtype=np.int64)
    return {str(region): float(np.mean(routed[subset.region_ids == region] == region)) for region in sorted(set(subset.region_ids.tolist()))}
