"""Unified config construction from merged layers."""

from typing import Any

from pydantic import BaseModel, ValidationError

from opera_forge_settings.errors import SettingsValidationError
from opera_forge_settings.merger import MergedSettings
from opera_forge_settings.registry import SchemaRegistry
from opera_forge_settings.transforms import (
    convert_keys_to_lowercase,
    resolve_environment_variables,
)


def _problems(
    error: ValidationError, namespace: str, merged: MergedSettings | None
) -> list[str]:
    """One line per failing key, naming the layer that set it when known."""
    problems = []
    for detail in error.errors():
        key = ".".join(str(part) for part in detail["loc"])
        origin = merged.origin_of(namespace, key) if merged and key else None
        where = f" [set by {origin}]" if origin else ""
        problems.append(f"{key or namespace}: {detail['msg']}{where}")
    return problems


def build_validated_namespace(
    namespace: str,
    model: type[BaseModel],
    data: dict[str, Any],
    merged: MergedSettings | None = None,
) -> BaseModel:
    """Validate one namespace's merged data through its pydantic model.

    Raises:
        SettingsValidationError: If validation fails, naming the offending
            keys and the layers that set them
    """
    layers = merged.layers.get(namespace) if merged else None
    try:
        transformed = resolve_environment_variables(data)
        transformed = convert_keys_to_lowercase(transformed)
        return model.model_validate(transformed)
    except ValidationError as e:
        raise SettingsValidationError(
            namespace, _problems(e, namespace, merged), layers
        ) from e
    except (TypeError, ValueError) as e:
        raise SettingsValidationError(namespace, [str(e)], layers) from e


def build_unified_config(
    unified_model: type[BaseModel], merged: MergedSettings
) -> BaseModel:
    """Validate every registered namespace and compose the unified model."""
    validated: dict[str, BaseModel] = {}
    for entry in SchemaRegistry.all_entries():
        validated[entry.namespace] = build_validated_namespace(
            entry.namespace,
            entry.model,
            merged.data.get(entry.namespace, {}),
            merged,
        )
    return unified_model(**validated)
