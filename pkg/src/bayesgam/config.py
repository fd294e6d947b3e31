"""Configuration management for Bayes GAM."""

from pathlib import Path
from typing import Any, Literal

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from .errors import ConfigError

# Load .env file at import time
load_dotenv()

CONFIG_FILENAMES = ("bayesgam.yaml", "bayesgam.yml", ".bayesgam.yaml")


class LinsysConfig(BaseModel):
    """Posterior factorization settings."""

    jitter: float = 0.0
    pivot_tolerance: float = 1e-13
    backend: Literal["auto", "cholmod", "dense"] = "auto"


class BasisConfig(BaseModel):
    """GP basis truncation settings."""

    energy_threshold: float = 0.9999


class TuningConfig(BaseModel):
    """Hyperparameter search settings."""

    grid_points: int = 20
    budget: int = 200
    cv_holdout: int = 10
    xatol: float = 1e-3
    fatol: float = 1e-6
    weak_prior_var: float = 1e6


class OutputConfig(BaseModel):
    """Table output settings."""

    significant_digits: int = 17


class LangfuseConfig(BaseModel):
    """Langfuse observability configuration."""

    enabled: bool = False
    public_key: str | None = None
    secret_key: str | None = None
    host: str | None = None


class Config(BaseSettings):
    """Main configuration for Bayes GAM."""

    model_config = SettingsConfigDict(
        env_prefix="BAYESGAM_",
        env_nested_delimiter="__",
    )

    # Core settings
    threads: int = Field(default=1, ge=1)
    seed: int = 0

    # Sub-configurations
    linsys: LinsysConfig = Field(default_factory=LinsysConfig)
    basis: BasisConfig = Field(default_factory=BasisConfig)
    tuning: TuningConfig = Field(default_factory=TuningConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    langfuse: LangfuseConfig = Field(default_factory=LangfuseConfig)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # Environment beats the YAML values passed in as init kwargs.
        return env_settings, init_settings, dotenv_settings, file_secret_settings


def load_config(config_path: Path | None = None) -> Config:
    """Load configuration from YAML file and environment variables."""
    config_data: dict[str, Any] = {}

    # Try to find config file
    if config_path is None:
        for name in CONFIG_FILENAMES:
            if Path(name).exists():
                config_path = Path(name)
                break

    # Load from YAML if exists
    if config_path and config_path.exists():
        with open(config_path) as f:
            try:
                raw = yaml.safe_load(f)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{config_path}: {exc}") from exc
        if raw is not None and not isinstance(raw, dict):
            raise ConfigError(f"{config_path} must hold a mapping of settings")
        if raw and "bayesgam" in raw:
            config_data = raw["bayesgam"] or {}
        elif raw:
            config_data = raw

    return Config(**config_data)
