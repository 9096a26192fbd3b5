from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.errors import RegistryError
from app.core.utils import derive_seed
from app.module.moe_model.registry import Coords

SENTINEL_DBM = -100.0
MAX_DBM = 0.0


class PathLossConfig(BaseModel):
    """Log-distance path loss with lognormal shadowing."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    p0_dbm: float = -30.0  # received power at 1 m
    exponent: float = Field(default=3.0, gt=0.0)
    shadowing_sigma_db: float = Field(default=2.0, ge=0.0)


class DeviceProfile(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    acronym: str
    rss_bias_db: float = 0.0
    gain_scale: float = Field(default=1.0, gt=0.0)
    noise_std_db: float = Field(default=2.0, ge=0.0)
    miss_probability: float = Field(default=0.02, ge=0.0, lt=1.0)
    intro_time_index: int = Field(default=0, ge=0)


# Reference phone set; introduction instants {0, 9 h, 1 d, 1 w, 1 mo, 3 mo} map to drift steps 0-5.
DEFAULT_DEVICES: tuple[DeviceProfile, ...] = (
    DeviceProfile(acronym="BLU", rss_bias_db=0.0, gain_scale=1.00, noise_std_db=2.0, miss_probability=0.02, intro_time_index=0),
    DeviceProfile(acronym="HTC", rss_bias_db=3.0, gain_scale=0.95, noise_std_db=1.5, miss_probability=0.03, intro_time_index=1),
    DeviceProfile(acronym="LG", rss_bias_db=-4.0, gain_scale=1.05, noise_std_db=2.5, miss_probability=0.05, intro_time_index=2),
    DeviceProfile(acronym="MOTO", rss_bias_db=5.0, gain_scale=0.90, noise_std_db=2.0, miss_probability=0.04, intro_time_index=3),
    DeviceProfile(acronym="OP3", rss_bias_db=-2.0, gain_scale=1.10, noise_std_db=1.8, miss_probability=0.02, intro_time_index=4),
    DeviceProfile(acronym="S7", rss_bias_db=-5.0, gain_scale=0.97, noise_std_db=2.2, miss_probability=0.06, intro_time_index=5),
)


class DriftConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    global_offsets_db: tuple[float, ...] = (0.0, -0.5, -1.0, -1.5, -2.5, -3.5)
    ap_walk_sigma_db: float = Field(default=0.5, ge=0.0)

    @field_validator("global_offsets_db")
    @classmethod
    def _zero_at_start(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value or value[0] != 0.0:
            raise ValueError("drift at time index 0 must be zero")
        return value


class BuildingTemplate(BaseModel):
    """Custom building: an RP grid of grid_x by grid_y points at 1 m spacing, n_aps access points."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = "custom"
    grid_x: int
    grid_y: int
    n_aps: int
    floor_z: float = 0.0


BUILDING_TEMPLATES: dict[str, BuildingTemplate] = {
    "building1": BuildingTemplate(name="building1", grid_x=12, grid_y=5, n_aps=172),
    "building2": BuildingTemplate(name="building2", grid_x=12, grid_y=4, n_aps=168),
}


class WorldConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    building: Literal["building1", "building2", "custom"] = "building1"
    custom: BuildingTemplate | None = None
    path_loss: PathLossConfig = PathLossConfig()
    detection_threshold_dbm: float = Field(default=-95.0, ge=SENTINEL_DBM, le=MAX_DBM)
    ap_margin_m: float = Field(default=30.0, ge=0.0)
    drift: DriftConfig = DriftConfig()
    samples_per_rp: int = Field(default=20, ge=1)

    @model_validator(mode="after")
    def _custom_dims(self) -> "WorldConfig":
        if self.building == "custom":
            if self.custom is None:
                raise ValueError("building = 'custom' needs a [world.custom] table")
            if min(self.custom.grid_x, self.custom.grid_y, self.custom.n_aps) <= 0:
                raise ValueError("custom building dimensions must be positive")
        return self

    def template(self) -> BuildingTemplate:
        return self.custom if self.building == "custom" else BUILDING_TEMPLATES[self.building]


class BuildingSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    rp_ids: tuple[int, ...]
    rp_coords: tuple[Coords, ...]
    ap_positions: tuple[Coords, ...]
    path_loss: PathLossConfig
    detection_threshold_dbm: float
    seed: int

    @property
    def n_aps(self) -> int:
        return len(self.ap_positions)

    @property
    def n_rps(self) -> int:
        return len(self.rp_ids)

    def rp_index(self, rp_id: int) -> int:
        try:
            return self.rp_lookup[rp_id]
        except KeyError:
            raise RegistryError(f"RP {rp_id} does not exist in {self.name}") from None

    @cached_property
    def rp_lookup(self) -> dict[int, int]:
        return {rp: i for i, rp in enumerate(self.rp_ids)}

    @cached_property
    def distances(self) -> np.ndarray:
        """RP x AP Euclidean distances in meters."""
        rps = np.asarray(self.rp_coords, dtype=np.float64)
        aps = np.asarray(self.ap_positions, dtype=np.float64)
        return np.linalg.norm(rps[:, None, :] - aps[None, :, :], axis=2)

    @cached_property
    def shadowing(self) -> np.ndarray:
        """Static lognormal shadowing per (RP, AP) in dB."""
        rng = np.random.default_rng(derive_seed(self.seed, "shadowing"))
        return rng.normal(0.0, self.path_loss.shadowing_sigma_db, size=(self.n_rps, self.n_aps))


@dataclass(frozen=True, eq=False)
class Fingerprint:
    rss: np.ndarray  # dBm, sentinel -100 for unseen APs
    device_id: str
    region_id: int
    rp_id: int
    coords: Coords
    time_index: int
