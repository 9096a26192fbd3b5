"""
Seeded synthetic fingerprint world: buildings, device heterogeneity and temporal drift.

Received power per AP j at an RP:
    raw = gain * (P0 - 10 n log10(max(d, 1 m)) + shadowing[rp, j]) + bias + drift(t, j) + noise
Values below the detection threshold, or dropped with the device miss probability, become the
-100 dBm sentinel; everything is clamped to [-100, 0].
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from app.core.errors import ConfigError, DataError, RegistryError
from app.core.logger import logger
from app.core.utils import derive_seed
from app.module.fingerprints.dataset import FingerprintDataset, partition_regions
from app.module.fingerprints.schemas import (
    BUILDING_TEMPLATES,
    MAX_DBM,
    SENTINEL_DBM,
    BuildingSpec,
    BuildingTemplate,
    DeviceProfile,
    DriftConfig,
    Fingerprint,
    PathLossConfig,
    WorldConfig,
)


def generate_building(
    template: str | BuildingTemplate,
    seed: int,
    path_loss: PathLossConfig | None = None,
    detection_threshold_dbm: float = -95.0,
    ap_margin_m: float = 30.0,
) -> BuildingSpec:
    """RPs on a 1 m grid (ids in x-major grid order) and uniformly scattered APs around it."""
    if isinstance(template, str):
        if template not in BUILDING_TEMPLATES:
            raise ConfigError(f"Unknown building template: {template}", details=f"choose from {sorted(BUILDING_TEMPLATES)}")
        template = BUILDING_TEMPLATES[template]
    if min(template.grid_x, template.grid_y, template.n_aps) <= 0:
        raise ConfigError(f"Building dimensions must be positive: {template.grid_x}x{template.grid_y} RPs, {template.n_aps} APs")

    rp_coords = tuple((float(x), float(y), template.floor_z) for x in range(template.grid_x) for y in range(template.grid_y))
    rng = np.random.default_rng(derive_seed(seed, f"aps:{template.name}"))
    xs = rng.uniform(-ap_margin_m, template.grid_x - 1 + ap_margin_m, size=template.n_aps)
    ys = rng.uniform(-ap_margin_m, template.grid_y - 1 + ap_margin_m, size=template.n_aps)
    zs = template.floor_z + rng.uniform(2.0, 3.0, size=template.n_aps)
    building = BuildingSpec(
        name=template.name,
        rp_ids=tuple(range(len(rp_coords))),
        rp_coords=rp_coords,
        ap_positions=tuple(zip(xs.tolist(), ys.tolist(), zs.tolist())),
        path_loss=path_loss or PathLossConfig(),
        detection_threshold_dbm=detection_threshold_dbm,
        seed=seed,
    )
    logger.debug(f"Generated {building.name}: {building.n_rps} RPs, {building.n_aps} APs")
    return building


@dataclass(frozen=True, eq=False)
class DriftModel:
    offsets: np.ndarray  # time_index x AP, dB; row 0 is zero

    @classmethod
    def build(cls, config: DriftConfig, n_aps: int, seed: int) -> "DriftModel":
        rng = np.random.default_rng(seed)
        steps = rng.normal(0.0, config.ap_walk_sigma_db, size=(len(config.global_offsets_db), n_aps))
        steps[0] = 0.0
        walk = np.cumsum(steps, axis=0)
        offsets = walk + np.asarray(config.global_offsets_db)[:, None]
        offsets[0] = 0.0
        return cls(offsets=offsets)

    @classmethod
    def none(cls, n_aps: int, n_times: int = 1) -> "DriftModel":
        return cls(offsets=np.zeros((n_times, n_aps)))

    def at(self, time_index: int) -> np.ndarray:
        if not 0 <= time_index < self.offsets.shape[0]:
            raise DataError(f"No drift defined for time index {time_index}", details=f"{self.offsets.shape[0]} time indices configured")
        return self.offsets[time_index]


def simulate_rss(
    building: BuildingSpec,
    device: DeviceProfile,
    rp_id: int,
    time_index: int,
    drift: DriftModel,
    rng: np.random.Generator,
    n_samples: int = 1,
) -> np.ndarray:
    """n_samples RSS vectors (dBm) for one (device, RP, time index)."""
    if time_index < device.intro_time_index:
        raise DataError(f"{device.acronym} is not introduced before time index {device.intro_time_index}")
    i = building.rp_index(rp_id)
    pl = building.path_loss
    distance = np.maximum(building.distances[i], 1.0)
    mean = device.gain_scale * (pl.p0_dbm - 10.0 * pl.exponent * np.log10(distance) + building.shadowing[i])
    mean = mean + device.rss_bias_db + drift.at(time_index)
    noise = rng.normal(0.0, device.noise_std_db, size=(n_samples, building.n_aps)) if device.noise_std_db > 0.0 else 0.0
    raw = mean[None, :] + noise
    missed = rng.random((n_samples, building.n_aps)) < device.miss_probability
    rss = np.where((raw < building.detection_threshold_dbm) | missed, SENTINEL_DBM, raw)
    return np.clip(rss, SENTINEL_DBM, MAX_DBM)


def simulate_fingerprint(
    building: BuildingSpec,
    device: DeviceProfile,
    rp_id: int,
    time_index: int,
    drift: DriftModel,
    rng: np.random.Generator,
    region_id: int = 0,
) -> Fingerprint:
    try:
        coords = building.rp_coords[building.rp_index(rp_id)]
    except RegistryError:
        logger.error(f"Cannot simulate fingerprint at unknown RP {rp_id}")
        raise
    rss = simulate_rss(building, device, rp_id, time_index, drift, rng)[0]
    return Fingerprint(rss=rss, device_id=device.acronym, region_id=region_id, rp_id=rp_id, coords=coords, time_index=time_index)


def generate_dataset(world: WorldConfig, devices: Sequence[DeviceProfile], n_rp: int, seed: int) -> tuple[BuildingSpec, FingerprintDataset]:
    """Every device surveys every RP samples_per_rp times at its introduction time index.

    Each (device, RP, time index) triple draws from its own stream derived from the master seed.
    """
    building = generate_building(
        world.template(),
        seed=derive_seed(seed, "building"),
        path_loss=world.path_loss,
        detection_threshold_dbm=world.detection_threshold_dbm,
        ap_margin_m=world.ap_margin_m,
    )
    drift = DriftModel.build(world.drift, building.n_aps, derive_seed(seed, "drift"))
    regions = partition_regions(building, n_rp)

    blocks, device_col, rp_col, time_col = [], [], [], []
    for device in devices:
        t = device.intro_time_index
        for rp in building.rp_ids:
            rng = np.random.default_rng(derive_seed(seed, f"fingerprint:{device.acronym}:{rp}:{t}"))
            blocks.append(simulate_rss(building, device, rp, t, drift, rng, n_samples=world.samples_per_rp))
            device_col += [device.acronym] * world.samples_per_rp
            rp_col += [rp] * world.samples_per_rp
            time_col += [t] * world.samples_per_rp

    rp_ids = np.asarray(rp_col, dtype=np.int64)
    coords = np.asarray(building.rp_coords, dtype=np.float64)[[building.rp_index(int(rp)) for rp in rp_ids]]
    dataset = FingerprintDataset(
        rss=np.vstack(blocks),
        device_ids=np.asarray(device_col, dtype=object),
        region_ids=np.asarray([regions[int(rp)] for rp in rp_ids], dtype=np.int64),
        rp_ids=rp_ids,
        coords=coords,
        time_index=np.asarray(time_col, dtype=np.int64),
    )
    logger.info(f"Generated {len(dataset)} fingerprints: {len(devices)} devices x {building.n_rps} RPs in {building.name}")
    return building, dataset
