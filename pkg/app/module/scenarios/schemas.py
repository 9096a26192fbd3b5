from dataclasses import dataclass
from enum import StrEnum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from app.module.continual.replay import ReplayBuffer
from app.module.continual.schemas import IncrementMode, TrainingReport
from app.module.moe_model.model import MoEModel

UnitType = Literal["device", "region"]


class Track(StrEnum):
    DIL = "dil"
    CIL = "cil"
    CDIL = "cdil"

    @property
    def display_name(self) -> str:
        return {"dil": "DIL-Exclusive", "cil": "CIL-Exclusive", "cdil": "CDIL"}[self.value]

    @property
    def mode(self) -> IncrementMode:
        return IncrementMode(self.value.upper())

    @property
    def unit_type(self) -> UnitType:
        return "device" if self is Track.DIL else "region"


class Increment(BaseModel):
    """One scenario step and the slice of data it trains on (devices x regions)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    label: str
    mode: IncrementMode
    baseline: bool = False
    devices: tuple[str, ...]
    regions: tuple[int, ...]
    new_regions: tuple[int, ...] = ()

    def pairs(self) -> list[tuple[str, int]]:
        return [(d, r) for d in self.devices for r in self.regions]


class ScenarioPlan(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    track: Track
    building: str
    n_rp: int
    region_count: int
    increments: tuple[Increment, ...]

    @property
    def unit_type(self) -> UnitType:
        return self.track.unit_type


class EvalRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    step: int
    label: str
    mode: IncrementMode | None = None
    unit_type: UnitType
    unit_id: str
    le_mean_m: float = Field(ge=0.0)
    le_worst_m: float = Field(ge=0.0)
    n_test: int


class MetricLog(BaseModel):
    """Per (step, unit) localization errors in evaluation order."""

    records: list[EvalRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def add(self, records: list[EvalRecord]) -> None:
        self.records.extend(records)

    def steps(self) -> list[int]:
        return sorted({r.step for r in self.records})

    def units(self) -> list[str]:
        """Units in order of first evaluation."""
        return list(dict.fromkeys(r.unit_id for r in self.records))

    def history(self, unit_id: str) -> list[float]:
        return [r.le_mean_m for r in sorted(self.records, key=lambda r: r.step) if r.unit_id == unit_id]

    def best(self, unit_id: str) -> float:
        return min(self.history(unit_id))

    def at_step(self, step: int) -> list[EvalRecord]:
        return [r for r in self.records if r.step == step]

    def step_mean(self, step: int) -> float:
        """Mean error over all test fingerprints seen so far at one step."""
        cell = self.at_step(step)
        n = sum(r.n_test for r in cell)
        return sum(r.le_mean_m * r.n_test for r in cell) / n if n else 0.0


class ForgettingReport(BaseModel):
    per_unit: dict[str, float]
    average: float
    units_counted: int


class StepTiming(BaseModel):
    step: int
    label: str
    seconds: float


@dataclass
class ScenarioResult:
    plan: ScenarioPlan
    seed: int
    log: MetricLog
    reports: list[TrainingReport]
    timings: list[StepTiming]
    model: MoEModel
    buffer: ReplayBuffer


class LatencyReport(BaseModel):
    calls: int
    mean_ms: float
    max_ms: float


class SweepRow(BaseModel):
    n_rp: int
    region_count: int
    final_mean_le_m: float
    steps: int
