"""Configuration system for opera-forge."""

from pathlib import Path

from opera_forge_settings import SchemaRegistry

from opera_forge.config.config import (
    AppConfig,
    LoggingSettings,
    OutputSettings,
    RuntimeSettings,
)

SchemaRegistry.register(
    namespace="core",
    model=AppConfig,
    defaults_file=Path(__file__).parent / "settings.toml",
)

__all__ = ["AppConfig", "LoggingSettings", "OutputSettings", "RuntimeSettings"]
