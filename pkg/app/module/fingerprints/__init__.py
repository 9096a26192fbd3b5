from app.module.fingerprints.dataset import FingerprintDataset, Pair, partition_regions, region_count, split_train_test
from app.module.fingerprints.dataset_io import load_dataset_csv, save_dataset_csv
from app.module.fingerprints.schemas import (
    BUILDING_TEMPLATES,
    DEFAULT_DEVICES,
    SENTINEL_DBM,
    BuildingSpec,
    BuildingTemplate,
    DeviceProfile,
    DriftConfig,
    Fingerprint,
    PathLossConfig,
    WorldConfig,
)
from app.module.fingerprints.world import DriftModel, generate_building, generate_dataset, simulate_fingerprint, simulate_rss

__all__ = [
    "BUILDING_TEMPLATES",
    "BuildingSpec",
    "BuildingTemplate",
    "DEFAULT_DEVICES",
    "DeviceProfile",
    "DriftConfig",
    "DriftModel",
    "Fingerprint",
    "FingerprintDataset",
    "Pair",
    "PathLossConfig",
    "SENTINEL_DBM",
    "WorldConfig",
    "generate_building",
    "generate_dataset",
    "load_dataset_csv",
    "partition_regions",
    "region_count",
    "save_dataset_csv",
    "simulate_fingerprint",
    "simulate_rss",
]
