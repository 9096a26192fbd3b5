from typing import Literal

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Process-level settings read from the environment.

    Experiment parameters do not live here; they come from the TOML run config
    (see app.config.run_config).
    """

    # Application Settings
    APP_NAME: str = "MOELO Lab"
    APP_VERSION: str = "0.1.0"
    API_VERSION: str = "v1"  # API route version
    DEBUG: bool = False

    # Logging Settings
    MOELO_LOG: Literal["error", "info", "debug"] = "info"

    # Online localization service
    CHECKPOINT_PATH: str | None = None
    SERVE_HOST: str = "127.0.0.1"
    SERVE_PORT: int = 8000

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=True,
    )

    @field_validator("MOELO_LOG", mode="before")
    @classmethod
    def _lower_level(cls, value: object) -> object:
        return value.strip().lower() if isinstance(value, str) else value


Config = Settings()
