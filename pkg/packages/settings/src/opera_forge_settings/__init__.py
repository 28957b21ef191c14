"""Layered configuration for opera-forge.

Public API:
    SchemaRegistry  -- register package config schemas
    configure()     -- choose the unified model and layer locations
    load_config()   -- load and merge all layers (cached)
    get_config()    -- load with command-line overrides applied
    apply_overrides -- apply dot-notation overrides to a config
"""

from pathlib import Path
from typing import Any

from pydantic import BaseModel

from opera_forge_settings.errors import (
    SettingsError,
    SettingsFileError,
    SettingsOverrideError,
    SettingsRegistryError,
    SettingsValidationError,
)
from opera_forge_settings.loader import SettingsLoader
from opera_forge_settings.merger import merge_layers
from opera_forge_settings.overrides import apply_overrides
from opera_forge_settings.registry import SchemaRegistry
from opera_forge_settings.unified import build_unified_config

_config: BaseModel | None = None
_unified_model: type[BaseModel] | None = None
_loader_kwargs: dict[str, Any] = {}


def configure(
    unified_model: type[BaseModel],
    project_root: Path | None = None,
    config_file: Path | None = None,
    environ: dict[str, str] | None = None,
) -> None:
    """Configure the settings system before first load.

    Args:
        unified_model: Pydantic model composing every namespace
        project_root: Directory searched for ``settings.toml``
        config_file: Explicit settings file (``--config``); must exist
        environ: Environment mapping; defaults to ``os.environ``
    """
    global _unified_model, _loader_kwargs, _config
    _unified_model = unified_model
    _loader_kwargs = {}
    if project_root is not None:
        _loader_kwargs["project_root"] = project_root
    if config_file is not None:
        _loader_kwargs["config_file"] = config_file
    if environ is not None:
        _loader_kwargs["environ"] = environ
    _config = None


def load_config() -> BaseModel:
    """Load, merge and validate all settings layers. Cached after first call."""
    global _config
    if _config is not None:
        return _config

    if _unified_model is None:
        raise SettingsError("Settings system not configured. Call configure() first.")

    loader = SettingsLoader(**_loader_kwargs)
    merged = merge_layers(loader.discover_layers())
    _config = build_unified_config(_unified_model, merged)
    return _config


def reload_config() -> BaseModel:
    global _config
    _config = None
    return load_config()


def get_config(overrides: dict[str, Any] | None = None) -> BaseModel:
    """Load config with command-line overrides applied.

    Args:
        overrides: Dotted key paths to values, e.g. ``{"core.runtime.seed": 3}``
    """
    config = load_config()
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def reset() -> None:
    """Reset the entire settings system. For testing only."""
    global _config, _unified_model, _loader_kwargs
    _config = None
    _unified_model = None
    _loader_kwargs = {}
    SchemaRegistry.clear()


__all__ = [
    "SchemaRegistry",
    "configure",
    "load_config",
    "reload_config",
    "get_config",
    "apply_overrides",
    "reset",
    "SettingsError",
    "SettingsFileError",
    "SettingsOverrideError",
    "SettingsRegistryError",
    "SettingsValidationError",
]
