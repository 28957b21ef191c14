"""Pydantic configuration models for opera-forge.

The structure matches ``settings.toml``. Domain sections reuse the models
of the modules that consume them, so a value validated here is exactly
what the pipeline receives.
"""

import logging
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator

from opera_forge.bench.probe import ProbeConfig
from opera_forge.config.defaults import (
    default_log_level,
    default_seed,
    default_show_path,
    default_show_time,
    default_threads,
    output_directory,
)
from opera_forge.data.synth import SynthConfig
from opera_forge.dsp.spectrogram import DspConfig
from opera_forge.models.config import EncoderConfig
from opera_forge.ssl.config import PretrainConfig


class LoggingSettings(BaseModel):
    """Logging configuration.

    Uses standard Python logging levels: DEBUG, INFO, WARNING, ERROR, CRITICAL.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    level: str = Field(
        default=default_log_level,
        description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)",
    )
    show_time: bool = Field(
        default=default_show_time,
        description="Show timestamps in log messages",
    )
    show_path: bool = Field(
        default=default_show_path,
        description="Show file path in log messages",
    )

    @field_validator("level", mode="before")
    @classmethod
    def validate_level(cls, v: str) -> str:
        """Validate logging level is valid."""
        valid_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        v_upper = str(v).upper()
        if v_upper not in valid_levels:
            raise ValueError(
                f"Invalid logging level: {v}. "
                f"Must be one of: {', '.join(sorted(valid_levels))}"
            )
        return v_upper

    def get_level_int(self) -> int:
        level_value: int = getattr(logging, self.level)
        return level_value


class OutputSettings(BaseModel):
    """Root directory for everything a run writes."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    directory: Path = Field(
        default=output_directory,
        description="Artifact root (also OPERA_FORGE_OUT or --out)",
    )


class RuntimeSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(default=default_seed, ge=0, description="Global seed")
    threads: int = Field(
        default=default_threads, ge=1, description="Worker cap for parallel stages"
    )


class AppConfig(BaseModel):
    """Root configuration model aggregating every section of settings.toml."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    logging: LoggingSettings = Field(
        default_factory=LoggingSettings,
        description="Logging configuration",
    )
    output: OutputSettings = Field(
        default_factory=OutputSettings,
        description="Output location",
    )
    runtime: RuntimeSettings = Field(
        default_factory=RuntimeSettings,
        description="Seed and parallelism",
    )
    dsp: DspConfig = Field(
        default_factory=DspConfig,
        description="Resampling and log-mel transform",
    )
    encoder: EncoderConfig = Field(
        default_factory=EncoderConfig,
        description="Encoder and pretraining-head architecture",
    )
    pretrain: PretrainConfig = Field(
        default_factory=PretrainConfig,
        description="Self-supervised objective and optimizer",
    )
    probe: ProbeConfig = Field(
        default_factory=ProbeConfig,
        description="Linear-probe optimizer",
    )
    synth: SynthConfig = Field(
        default_factory=SynthConfig,
        description="Synthetic corpus generator",
    )
