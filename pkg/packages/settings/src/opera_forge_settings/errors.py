"""Error hierarchy for the layered settings system."""

from pathlib import Path


class SettingsError(Exception):
    """Base exception for all settings errors."""


class SettingsFileError(SettingsError):
    """A settings file exists but cannot be read or parsed as TOML.

    Missing optional layers are skipped silently; a missing file that was
    named explicitly (``--config PATH``) is reported through this error.
    """

    def __init__(self, file_path: Path, reason: str) -> None:
        self.file_path = file_path
        self.reason = reason
        super().__init__(f"Failed to load {file_path}: {reason}")


class SettingsValidationError(SettingsError):
    """Merged settings for a namespace fail model validation.

    Each problem names a key, what is wrong with it and, when known, the
    layer that set it. Unknown keys land here too, since every model forbids
    extras.
    """

    def __init__(
        self,
        namespace: str,
        problems: list[str],
        source_layers: list[str] | None = None,
    ) -> None:
        self.namespace = namespace
        self.problems = problems
        self.source_layers = source_layers or []
        layer_info = (
            f" (layers: {', '.join(self.source_layers)})" if self.source_layers else ""
        )
        super().__init__(
            f"Invalid settings in '{namespace}'{layer_info}: {'; '.join(problems)}"
        )


class SettingsOverrideError(SettingsError):
    """A command-line override targets a key path that does not exist."""

    def __init__(self, key: str, suggestion: str | None = None) -> None:
        self.key = key
        self.suggestion = suggestion
        hint = f" (did you mean '{suggestion}'?)" if suggestion else ""
        super().__init__(f"Unknown settings key: {key}{hint}")


class SettingsRegistryError(SettingsError):
    """Namespace registered twice, or looked up before registration."""

    def __init__(self, namespace: str, reason: str = "") -> None:
        self.namespace = namespace
        self.reason = reason
        detail = f": {reason}" if reason else ""
        super().__init__(f"Registry error for namespace '{namespace}'{detail}")
