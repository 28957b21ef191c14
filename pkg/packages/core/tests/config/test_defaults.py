"""Tests for default configuration values."""

from pathlib import Path

from opera_forge.config import defaults


class TestLoggingDefaults:
    """Tests for logging default values."""

    def test_default_log_level(self):
        """Test default log level is INFO."""
        assert defaults.default_log_level == "INFO"

    def test_default_show_flags(self):
        """Test timestamps are shown and paths are not."""
        assert defaults.default_show_time is True
        assert defaults.default_show_path is False


class TestOutputDefaults:
    """Tests for output default values."""

    def test_output_directory_is_relative(self):
        """Test artifacts default to a directory under the working directory."""
        assert isinstance(defaults.output_directory, Path)
        assert not defaults.output_directory.is_absolute()
        assert defaults.output_directory == Path("opera-forge-out")


class TestRuntimeDefaults:
    """Tests for runtime default values."""

    def test_seed_and_threads(self):
        """Test the default run is seeded and single-threaded."""
        assert defaults.default_seed == 0
        assert defaults.default_threads == 1
