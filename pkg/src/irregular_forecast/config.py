"""Process-level configuration for the forecasting toolkit."""

from typing import Optional
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings with environment variable support.

    Run-level experiment parameters live in the INI run config
    (see ``irregular_forecast.models.run_config``); these settings only cover
    how the process logs, traces and schedules work.
    """

    # Logging
    debug: bool = False
    log_level: str = "INFO"
    log_json: bool = True

    # Execution
    jobs: Optional[int] = Field(default=None, ge=1)
    default_seed: int = 42

    # Tracing
    tracing_enabled: bool = False
    service_name: str = "irregular-forecast"
    environment: str = "dev"
    version: str = "0.1.0"

    model_config = SettingsConfigDict(
        env_prefix="IRREGULAR_FORECAST_", env_file=".env", case_sensitive=False, extra="ignore"
    )


# Global settings instance
settings = Settings()
