from collections.abc import Sequence

from app.core.logger import logger
from app.core.utils import derive_seed
from app.module.continual.schemas import TrainConfig
from app.module.fingerprints.dataset import FingerprintDataset, partition_regions, split_train_test
from app.module.fingerprints.schemas import BuildingSpec, DeviceProfile
from app.module.moe_model.schemas import ModelConfig
from app.module.scenarios.planning import build_plan
from app.module.scenarios.runner import run_scenario
from app.module.scenarios.schemas import SweepRow, Track


def granularity_sweep(
    building: BuildingSpec,
    dataset: FingerprintDataset,
    devices: Sequence[DeviceProfile],
    n_rp_values: Sequence[int],
    model_config: ModelConfig,
    train_config: TrainConfig,
    seed: int,
    track: Track = Track.CDIL,
    test_fraction: float = 0.2,
) -> list[SweepRow]:
    """Re-partition the same RPs at each granularity and run the track once per value."""
    rows = []
    for n_rp in n_rp_values:
        partition = partition_regions(building, n_rp)
        train, test = split_train_test(dataset.with_regions(partition), test_fraction, derive_seed(seed, "split"))
        plan = build_plan(track, building, devices, n_rp, partition=partition)
        result = run_scenario(plan, train, test, model_config, train_config, seed)
        final = result.log.steps()[-1]
        rows.append(SweepRow(n_rp=n_rp, region_count=plan.region_count, final_mean_le_m=result.log.step_mean(final), steps=len(plan.increments)))
        logger.info(f"n_rp={n_rp}: {plan.region_count} regions, final mean LE {rows[-1].final_mean_le_m:.3f} m")
    return rows
