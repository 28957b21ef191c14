"""Deep merge of settings layers with per-key provenance."""

import copy
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Any

from opera_forge_settings.loader import LayerSource


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge ``override`` into ``base`` and return a new dict.

    Dicts merge key by key; lists and scalars replace whatever was there.
    """
    result = copy.deepcopy(base)
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = deep_merge(result[key], value)
        else:
            result[key] = copy.deepcopy(value)
    return result


def leaf_keys(data: dict[str, Any], prefix: str = "") -> Iterator[str]:
    """Dotted, lower-cased paths of every non-table value in ``data``."""
    for key, value in data.items():
        path = f"{prefix}{str(key).lower()}"
        if isinstance(value, dict) and value:
            yield from leaf_keys(value, f"{path}.")
        else:
            yield path


@dataclass
class MergedSettings:
    """Merged data per namespace and the layer that last set each key.

    ``key_origins[namespace]["pretrain.epochs"]`` is the label of the layer
    whose value survived the merge, e.g. ``config (run.toml)``.
    """

    data: dict[str, dict[str, Any]] = field(default_factory=dict)
    key_origins: dict[str, dict[str, str]] = field(default_factory=dict)
    layers: dict[str, list[str]] = field(default_factory=dict)

    def origin_of(self, namespace: str, key: str) -> str | None:
        """Layer label for ``key`` or its closest set ancestor."""
        origins = self.key_origins.get(namespace, {})
        parts = key.lower().split(".")
        while parts:
            found = origins.get(".".join(parts))
            if found is not None:
                return found
            parts.pop()
        return None


def merge_layers(layers: list[LayerSource]) -> MergedSettings:
    """Merge layers, lowest priority first, into one dict per namespace."""
    merged = MergedSettings()
    for layer in layers:
        ns = layer.namespace
        merged.data[ns] = deep_merge(merged.data.get(ns, {}), layer.data)
        origins = merged.key_origins.setdefault(ns, {})
        for key in leaf_keys(layer.data):
            origins[key] = layer.label
        merged.layers.setdefault(ns, []).append(layer.layer)
    return merged
