"""Settings layer discovery and TOML loading."""

import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from opera_forge_settings.errors import SettingsFileError
from opera_forge_settings.paths import get_project_settings_file
from opera_forge_settings.registry import SchemaRegistry
from opera_forge_settings.transforms import parse_env_vars


@dataclass
class LayerSource:
    """A single settings layer for one namespace."""

    layer: str
    namespace: str
    file_path: Path | None
    data: dict[str, Any]

    @property
    def label(self) -> str:
        """``config (run.toml)`` style description used in error messages."""
        if self.file_path is None:
            return self.layer
        return f"{self.layer} ({self.file_path})"


def load_toml(file_path: Path) -> dict[str, Any]:
    """Load and parse a TOML file.

    Raises:
        SettingsFileError: If the file cannot be read or parsed
    """
    try:
        with file_path.open("rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise SettingsFileError(file_path=file_path, reason=str(e)) from e
    except OSError as e:
        raise SettingsFileError(file_path=file_path, reason=str(e)) from e


def _split_namespaced(
    data: dict[str, Any], layer: str, file_path: Path
) -> list[LayerSource]:
    """Split a file with ``[core.*]`` sections into per-namespace layers.

    A file with no registered namespace at the top level is treated as flat
    sections for the single registered namespace, so ``--config run.toml``
    can be written as ``[pretrain]`` instead of ``[core.pretrain]``.
    """
    data_lower = {k.lower(): v for k, v in data.items()}
    namespaces = SchemaRegistry.all_namespaces()
    found = [ns for ns in namespaces if ns in data_lower]
    if found:
        return [
            LayerSource(
                layer=layer, namespace=ns, file_path=file_path, data=data_lower[ns]
            )
            for ns in found
        ]
    flat = SchemaRegistry.flat_namespace()
    if flat is not None and data_lower:
        return [
            LayerSource(layer=layer, namespace=flat, file_path=file_path, data=data)
        ]
    return []


class SettingsLoader:
    """Discovers and loads settings from every layer.

    Layers, lowest priority first:
    1. Package defaults (flat sections, namespace from the registry)
    2. Project ``settings.toml`` in the working directory
    3. An explicit config file (``--config PATH``); missing is an error
    4. Environment variables (``OPERAFORGE_SECTION__KEY``, ``OPERA_FORGE_OUT``)

    Command-line flags are applied afterwards through ``apply_overrides``.
    """

    def __init__(
        self,
        project_root: Path | None = None,
        config_file: Path | None = None,
        environ: dict[str, str] | None = None,
    ) -> None:
        self.project_root = project_root
        self.config_file = config_file
        self.environ = environ

    def discover_layers(self) -> list[LayerSource]:
        layers: list[LayerSource] = []

        for entry in SchemaRegistry.all_entries():
            layers.append(
                LayerSource(
                    layer="package",
                    namespace=entry.namespace,
                    file_path=entry.defaults_file,
                    data=load_toml(entry.defaults_file),
                )
            )

        if self.project_root is not None:
            project_file = get_project_settings_file(self.project_root)
            if project_file.exists():
                layers.extend(
                    _split_namespaced(load_toml(project_file), "project", project_file)
                )

        if self.config_file is not None:
            if not self.config_file.exists():
                raise SettingsFileError(
                    file_path=self.config_file, reason="file does not exist"
                )
            layers.extend(
                _split_namespaced(
                    load_toml(self.config_file), "config", self.config_file
                )
            )

        raw_env = parse_env_vars(self.environ)
        for entry in SchemaRegistry.all_entries():
            namespace_data = {k: v for k, v in raw_env.items() if k in entry.sections}
            if namespace_data:
                layers.append(
                    LayerSource(
                        layer="env",
                        namespace=entry.namespace,
                        file_path=None,
                        data=namespace_data,
                    )
                )

        return layers
