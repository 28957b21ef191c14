"""Schema registration for namespace-based configuration."""

from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

from pydantic import BaseModel

from opera_forge_settings.errors import SettingsRegistryError


@dataclass(frozen=True)
class SchemaEntry:
    """A registered configuration schema."""

    namespace: str
    model: type[BaseModel]
    defaults_file: Path

    @property
    def sections(self) -> frozenset[str]:
        return frozenset(self.model.model_fields)


class SchemaRegistry:
    """Registry of configuration schemas keyed by namespace.

    Settings files may be written with flat ``[section]`` tables when a
    single namespace is registered, so a namespace must never share a name
    with a section of any registered model.
    """

    _entries: ClassVar[dict[str, SchemaEntry]] = {}

    @classmethod
    def register(
        cls,
        namespace: str,
        model: type[BaseModel],
        defaults_file: Path,
    ) -> None:
        """Register a package's config schema.

        Raises:
            SettingsRegistryError: If the namespace is taken, is not a
                lowercase identifier, collides with a section name or has
                no defaults file
        """
        if namespace in cls._entries:
            raise SettingsRegistryError(
                namespace=namespace, reason="namespace already registered"
            )
        if not (namespace.isidentifier() and namespace.islower()):
            raise SettingsRegistryError(
                namespace=namespace, reason="must be a lowercase identifier"
            )
        entry = SchemaEntry(
            namespace=namespace, model=model, defaults_file=defaults_file
        )
        for other in [entry, *cls._entries.values()]:
            clash = {namespace} & other.sections or entry.sections & {other.namespace}
            if clash:
                raise SettingsRegistryError(
                    namespace=namespace,
                    reason=f"'{clash.pop()}' is both a namespace and a section",
                )
        if not defaults_file.is_file():
            raise SettingsRegistryError(
                namespace=namespace, reason=f"defaults file {defaults_file} missing"
            )
        cls._entries[namespace] = entry

    @classmethod
    def get(cls, namespace: str) -> SchemaEntry:
        """Retrieve a registered schema by namespace.

        Raises:
            SettingsRegistryError: If the namespace is not registered
        """
        try:
            return cls._entries[namespace]
        except KeyError:
            raise SettingsRegistryError(
                namespace=namespace, reason="namespace not registered"
            ) from None

    @classmethod
    def flat_namespace(cls) -> str | None:
        """The namespace flat ``[section]`` files belong to, if unambiguous."""
        return next(iter(cls._entries)) if len(cls._entries) == 1 else None

    @classmethod
    def all_entries(cls) -> list[SchemaEntry]:
        return list(cls._entries.values())

    @classmethod
    def all_namespaces(cls) -> list[str]:
        return list(cls._entries.keys())

    @classmethod
    def clear(cls) -> None:
        """Remove all registered schemas. Used by tests."""
        cls._entries.clear()
