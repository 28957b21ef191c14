"""Transformations applied to raw settings dictionaries."""

import os
from typing import Any

from opera_forge_settings.paths import OUTPUT_ENV_VAR

ENV_PREFIX = "OPERAFORGE_"


def convert_keys_to_lowercase(data: dict[str, Any]) -> dict[str, Any]:
    """Recursively lowercase dictionary keys; values are left alone."""
    result: dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            result[key.lower()] = convert_keys_to_lowercase(value)
        else:
            result[key.lower()] = value
    return result


def resolve_environment_variables(data: Any) -> Any:
    """Expand ``$VAR`` references inside string values (recursively)."""
    if isinstance(data, str):
        return os.path.expandvars(data)
    if isinstance(data, dict):
        return {k: resolve_environment_variables(v) for k, v in data.items()}
    if isinstance(data, list):
        return [resolve_environment_variables(item) for item in data]
    return data


def parse_env_vars(environ: dict[str, str] | None = None) -> dict[str, dict[str, str]]:
    """Parse ``OPERAFORGE_SECTION__KEY`` variables into section-keyed dicts.

    ``OPERA_FORGE_OUT=/path`` is the one special case and maps to
    ``{"output": {"directory": "/path"}}``. Names without the double
    underscore separator are ignored.

    Example:
        ``OPERAFORGE_PRETRAIN__EPOCHS=5`` -> ``{"pretrain": {"epochs": "5"}}``
    """
    if environ is None:
        environ = dict(os.environ)

    result: dict[str, dict[str, str]] = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        parts = key[len(ENV_PREFIX) :].split("__", 1)
        if len(parts) != 2 or not parts[0] or not parts[1]:
            continue
        section, field = parts[0].lower(), parts[1].lower()
        result.setdefault(section, {})[field] = value

    out_dir = environ.get(OUTPUT_ENV_VAR)
    if out_dir:
        result.setdefault("output", {})["directory"] = out_dir

    return result
