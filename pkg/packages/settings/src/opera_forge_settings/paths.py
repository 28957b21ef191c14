"""Names and locations used by the settings layers."""

from pathlib import Path

APP_NAME = "opera-forge"
SETTINGS_FILENAME = "settings.toml"

# Root for every artifact a run writes. Overridden by OPERA_FORGE_OUT and --out.
DEFAULT_OUTPUT_DIRNAME = "opera-forge-out"
OUTPUT_ENV_VAR = "OPERA_FORGE_OUT"


def get_project_settings_file(project_root: Path) -> Path:
    return project_root / SETTINGS_FILENAME
