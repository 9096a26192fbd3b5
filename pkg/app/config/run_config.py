"""
Experiment configuration read from a TOML file, with command-line values layered on top.

Every table rejects unknown keys, so a typo stops the run before any work starts.
"""

import tomllib
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict, TomlConfigSettingsSource

from app.core.errors import ConfigError
from app.module.continual.schemas import TrainConfig
from app.module.fingerprints.schemas import DEFAULT_DEVICES, DeviceProfile, WorldConfig
from app.module.moe_model.schemas import ModelConfig
from app.module.scenarios.schemas import Track


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tracks: list[Track] = [Track.DIL, Track.CIL, Track.CDIL]
    n_rp: int = Field(default=10, ge=1)
    n_steps: int | None = Field(default=None, ge=1)
    sweep_n_rp: list[int] = [5, 10, 15, 20]
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    seeds: list[int] = [0]
    naive_baseline: bool = True
    latency_calls: int = Field(default=200, ge=1)
    jobs: int = Field(default=1, ge=1)


class RunConfig(BaseSettings):
    model_config = SettingsConfigDict(extra="forbid")

    seed: int = 0
    output_dir: Path = Path("runs")
    dataset: Path | None = None
    world: WorldConfig = WorldConfig()
    devices: list[DeviceProfile] = list(DEFAULT_DEVICES)
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    scenario: ScenarioConfig = ScenarioConfig()

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # flags > TOML file > defaults; the environment only carries process settings
        return init_settings, TomlConfigSettingsSource(settings_cls)


def _key(loc: tuple) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def load_run_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Validate the TOML file at path (optional) with overrides applied on top."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    settings_cls: type[RunConfig] = RunConfig
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        try:
            tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Malformed TOML in {path}", details=str(e)) from e
        settings_cls = type("FileRunConfig", (RunConfig,), {"model_config": SettingsConfigDict(extra="forbid", toml_file=path)})
    try:
        return settings_cls(**overrides)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"Invalid config key '{_key(first['loc'])}': {first['msg']}", details=f"{e.error_count()} error(s)") from e
