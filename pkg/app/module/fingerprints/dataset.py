from collections.abc import Collection, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from app.core.errors import ConfigError, DataError, ShapeError
from app.core.logger import logger
from app.core.utils import derive_seed
from app.module.fingerprints.schemas import MAX_DBM, SENTINEL_DBM, BuildingSpec, Fingerprint
from app.module.moe_model.registry import RegionSpec

Pair = tuple[str, int]


@dataclass(frozen=True, eq=False)
class FingerprintDataset:
    """Columnar fingerprint store. Row i of every column describes the same fingerprint."""

    rss: np.ndarray
    device_ids: np.ndarray
    region_ids: np.ndarray
    rp_ids: np.ndarray
    coords: np.ndarray
    time_index: np.ndarray

    def __post_init__(self):
        if self.rss.ndim != 2:
            raise ShapeError(f"RSS block must be 2-D, got shape {self.rss.shape}")
        n = self.rss.shape[0]
        for name in ("device_ids", "region_ids", "rp_ids", "coords", "time_index"):
            if getattr(self, name).shape[0] != n:
                raise ShapeError(f"Column {name} has {getattr(self, name).shape[0]} rows, RSS has {n}")
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise ShapeError(f"Coordinates must be n x 3, got {self.coords.shape}")
        if n and (self.rss.min() < SENTINEL_DBM or self.rss.max() > MAX_DBM or not np.all(np.isfinite(self.rss))):
            raise DataError(f"RSS values must lie in [{SENTINEL_DBM:g}, {MAX_DBM:g}] dBm")

    def __len__(self) -> int:
        return self.rss.shape[0]

    def __getitem__(self, i: int) -> Fingerprint:
        return Fingerprint(
            rss=self.rss[i],
            device_id=str(self.device_ids[i]),
            region_id=int(self.region_ids[i]),
            rp_id=int(self.rp_ids[i]),
            coords=tuple(float(c) for c in self.coords[i]),
            time_index=int(self.time_index[i]),
        )

    @property
    def n_aps(self) -> int:
        return self.rss.shape[1]

    @classmethod
    def empty(cls, n_aps: int) -> "FingerprintDataset":
        return cls(
            rss=np.zeros((0, n_aps)),
            device_ids=np.zeros(0, dtype=object),
            region_ids=np.zeros(0, dtype=np.int64),
            rp_ids=np.zeros(0, dtype=np.int64),
            coords=np.zeros((0, 3)),
            time_index=np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def concat(cls, parts: Sequence["FingerprintDataset"]) -> "FingerprintDataset":
        if not parts:
            raise DataError("Nothing to concatenate")
        return cls(
            rss=np.vstack([p.rss for p in parts]),
            device_ids=np.concatenate([p.device_ids for p in parts]),
            region_ids=np.concatenate([p.region_ids for p in parts]),
            rp_ids=np.concatenate([p.rp_ids for p in parts]),
            coords=np.vstack([p.coords for p in parts]),
            time_index=np.concatenate([p.time_index for p in parts]),
        )

    def take(self, indices) -> "FingerprintDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return FingerprintDataset(
            rss=self.rss[indices],
            device_ids=self.device_ids[indices],
            region_ids=self.region_ids[indices],
            rp_ids=self.rp_ids[indices],
            coords=self.coords[indices],
            time_index=self.time_index[indices],
        )

    def select(
        self,
        devices: Collection[str] | None = None,
        regions: Collection[int] | None = None,
        time_indices: Collection[int] | None = None,
    ) -> "FingerprintDataset":
        mask = np.ones(len(self), dtype=bool)
        if devices is not None:
            mask &= np.isin(self.device_ids.astype(str), list(devices))
        if regions is not None:
            mask &= np.isin(self.region_ids, list(regions))
        if time_indices is not None:
            mask &= np.isin(self.time_index, list(time_indices))
        return self.take(np.flatnonzero(mask))

    def devices(self) -> list[str]:
        """Device ids in order of first appearance."""
        return list(dict.fromkeys(str(d) for d in self.device_ids))

    def regions(self) -> list[int]:
        return sorted({int(r) for r in self.region_ids})

    def pairs(self) -> list[Pair]:
        """(device, region) pairs present, in order of first appearance."""
        return list(dict.fromkeys((str(d), int(r)) for d, r in zip(self.device_ids, self.region_ids)))

    def pair_indices(self) -> dict[Pair, np.ndarray]:
        out: dict[Pair, list[int]] = {}
        for i, (d, r) in enumerate(zip(self.device_ids, self.region_ids)):
            out.setdefault((str(d), int(r)), []).append(i)
        return {pair: np.asarray(rows, dtype=np.int64) for pair, rows in out.items()}

    def features(self) -> np.ndarray:
        """Min-max scaled RSS: -100 dBm -> 0, 0 dBm -> 1."""
        return (self.rss - SENTINEL_DBM) / (MAX_DBM - SENTINEL_DBM)

    def with_regions(self, assignment: Mapping[int, int]) -> "FingerprintDataset":
        """Same fingerprints re-labelled with another RP -> region partition."""
        try:
            regions = np.asarray([assignment[int(rp)] for rp in self.rp_ids], dtype=np.int64)
        except KeyError as e:
            raise DataError(f"RP {e.args[0]} has no region in the new partition") from None
        return FingerprintDataset(self.rss, self.device_ids, regions, self.rp_ids, self.coords, self.time_index)

    def region_spec(self, region_id: int) -> RegionSpec:
        """The region's RPs (ascending id) with their surveyed coordinates."""
        rows = np.flatnonzero(self.region_ids == region_id)
        if rows.size == 0:
            raise DataError(f"No fingerprints for region {region_id}")
        rp_coords: dict[int, tuple[float, float, float]] = {}
        for i in rows:
            rp_coords.setdefault(int(self.rp_ids[i]), tuple(float(c) for c in self.coords[i]))
        rp_ids = sorted(rp_coords)
        return RegionSpec(region_id=region_id, rp_ids=tuple(rp_ids), coords=tuple(rp_coords[rp] for rp in rp_ids))


def partition_regions(building: BuildingSpec, n_rp: int) -> dict[int, int]:
    """Consecutive groups of n_rp RPs in grid order; the last region may be smaller."""
    if n_rp < 1:
        raise ConfigError(f"n_rp must be at least 1, got {n_rp}")
    if n_rp > building.n_rps:
        raise ConfigError(f"n_rp = {n_rp} exceeds the {building.n_rps} RPs of {building.name}")
    order = sorted(range(building.n_rps), key=lambda i: (building.rp_coords[i][0], building.rp_coords[i][1], building.rp_coords[i][2]))
    return {building.rp_ids[i]: position // n_rp for position, i in enumerate(order)}


def region_count(n_rps: int, n_rp: int) -> int:
    return -(-n_rps // n_rp)


def split_train_test(dataset: FingerprintDataset, test_fraction: float, seed: int) -> tuple[FingerprintDataset, FingerprintDataset]:
    """Stratified per (device, region): each pair with two or more samples lands in both splits."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    train_rows, test_rows = [], []
    for (device, region), rows in dataset.pair_indices().items():
        if rows.size < 2:
            logger.warning(f"Pair ({device}, region {region}) has a single sample; kept in the training split")
            train_rows.append(rows)
            continue
        n_test = min(max(round(test_fraction * rows.size), 1), rows.size - 1)
        rng = np.random.default_rng(derive_seed(seed, f"split:{device}:{region}"))
        shuffled = rows[rng.permutation(rows.size)]
        test_rows.append(shuffled[:n_test])
        train_rows.append(shuffled[n_test:])
    train = np.sort(np.concatenate(train_rows)) if train_rows else np.zeros(0, dtype=np.int64)
    test = np.sort(np.concatenate(test_rows)) if test_rows else np.zeros(0, dtype=np.int64)
    return dataset.take(train), dataset.take(test)
