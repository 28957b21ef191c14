"""Default configuration values."""

from pathlib import Path

from opera_forge_settings.paths import DEFAULT_OUTPUT_DIRNAME

# Logging defaults
default_log_level = "INFO"
default_show_time = True
default_show_path = False

# Output defaults (relative to the working directory)
output_directory = Path(DEFAULT_OUTPUT_DIRNAME)

# Runtime defaults; one thread keeps every output byte-identical
default_seed = 0
default_threads = 1
