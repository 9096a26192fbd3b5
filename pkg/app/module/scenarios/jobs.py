"""
Config-driven experiment jobs: one (track, seed) pair per job, each owning its model and output directory.
"""

import asyncio
from pathlib import Path

from app.config.run_config import RunConfig
from app.core.logger import logger
from app.core.performance import PerformanceMetrics, timing_decorator
from app.core.utils import derive_seed
from app.module.fingerprints.dataset import FingerprintDataset, split_train_test
from app.module.fingerprints.dataset_io import load_dataset_csv
from app.module.fingerprints.schemas import BuildingSpec
from app.module.fingerprints.world import generate_building, generate_dataset
from app.module.moe_model.checkpoint import save_model_checkpoint
from app.module.scenarios.baseline import naive_baseline_run
from app.module.scenarios.planning import build_plan
from app.module.scenarios.reports import scenario_summary, write_metrics_csv, write_summary
from app.module.scenarios.runner import latency_report, load_experiment_checkpoint, routing_share, run_scenario
from app.module.scenarios.schemas import Track

EXPERIMENT_FILE = "experiment.json"
MODEL_FILE = "model.json"
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"


def job_data(config: RunConfig, seed: int) -> tuple[BuildingSpec, FingerprintDataset]:
    """The configured dataset file, or a synthetic world generated from the seed."""
    if config.dataset is not None:
        world = config.world
        building = generate_building(world.template(), seed=derive_seed(seed, "building"), path_loss=world.path_loss)
        return building, load_dataset_csv(config.dataset)
    return generate_dataset(config.world, config.devices, config.scenario.n_rp, seed)


@timing_decorator
def run_job(config: RunConfig, track: Track, seed: int, out_dir: Path, resume: bool = False) -> dict:
    building, dataset = job_data(config, seed)
    partition = {int(rp): int(region) for rp, region in zip(dataset.rp_ids, dataset.region_ids)}
    train, test = split_train_test(dataset, config.scenario.test_fraction, derive_seed(seed, "split"))
    plan = build_plan(track, building, config.devices, config.scenario.n_rp, n_steps=config.scenario.n_steps, partition=partition)

    checkpoint_path = out_dir / EXPERIMENT_FILE
    checkpoint = load_experiment_checkpoint(checkpoint_path) if resume and checkpoint_path.is_file() else None
    metrics = PerformanceMetrics()
    result = run_scenario(plan, train, test, config.model, config.train, seed, checkpoint_path=checkpoint_path, resume=checkpoint, metrics=metrics)

    naive_log = None
    if config.scenario.naive_baseline:
        naive_log, _ = naive_baseline_run(plan, train, test, config.model, config.train, seed)

    write_metrics_csv(result.log, out_dir / METRICS_FILE)
    save_model_checkpoint(result.model, out_dir / MODEL_FILE)
    latency = latency_report(result.model, test, config.scenario.latency_calls, metrics=metrics)
    summary = scenario_summary(result, latency, naive_log, routing=routing_share(result.model, test))
    summary["timings"] = metrics.get_summary()
    write_summary(summary, out_dir / SUMMARY_FILE)
    return summary


def job_directory(out: Path, track: Track, seed: int, single: bool) -> Path:
    return out if single else out / f"{track.value}-seed{seed}"


async def _run_jobs(config: RunConfig, out: Path, resume: bool) -> list[dict]:
    jobs = [(track, seed) for track in config.scenario.tracks for seed in config.scenario.seeds]
    single = len(jobs) == 1
    gate = asyncio.Semaphore(config.scenario.jobs)

    async def run_one(track: Track, seed: int) -> dict:
        async with gate:
            logger.info(f"Starting job {track.display_name}, seed {seed}")
            return await asyncio.to_thread(run_job, config, track, seed, job_directory(out, track, seed, single), resume)

    summaries = await asyncio.gather(*(run_one(track, seed) for track, seed in jobs))
    if not single:
        write_summary({"jobs": list(summaries)}, out / SUMMARY_FILE)
    return list(summaries)


def run_jobs(config: RunConfig, out: Path, resume: bool = False) -> list[dict]:
    """Every (track, seed) job of the config, up to scenario.jobs at a time."""
    return asyncio.run(_run_jobs(config, Path(out), resume))
