"""Command-line override application for validated config objects."""

import difflib
from typing import Any

from pydantic import BaseModel

from opera_forge_settings.errors import SettingsOverrideError


def _flatten_keys(data: dict[str, Any], prefix: str = "") -> list[str]:
    keys: list[str] = []
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        keys.append(dotted)
        if isinstance(value, dict):
            keys.extend(_flatten_keys(value, f"{dotted}."))
    return keys


def apply_overrides(
    config: BaseModel,
    overrides: dict[str, Any],
) -> BaseModel:
    """Apply dotted-key overrides to a validated config and re-validate.

    Keys carry the namespace prefix, e.g. ``core.runtime.seed`` or
    ``core.pretrain.epochs``. ``None`` values are skipped so that unset
    optional flags leave lower layers alone.

    Raises:
        SettingsOverrideError: If a key path does not exist in the config
    """
    active = {k: v for k, v in overrides.items() if v is not None}
    if not active:
        return config

    config_dict = config.model_dump(mode="python")

    for dotted_key, value in active.items():
        parts = dotted_key.split(".")
        target = config_dict
        for segment in parts[:-1]:
            if not isinstance(target, dict) or segment not in target:
                target = None
                break
            target = target[segment]

        leaf = parts[-1]
        if not isinstance(target, dict) or leaf not in target:
            close = difflib.get_close_matches(
                dotted_key, _flatten_keys(config_dict), n=1
            )
            raise SettingsOverrideError(
                key=dotted_key, suggestion=close[0] if close else None
            )
        target[leaf] = value

    return config.__class__.model_validate(config_dict)
