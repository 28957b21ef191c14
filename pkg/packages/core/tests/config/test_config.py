"""Tests for Pydantic configuration models."""

import logging
from pathlib import Path

import pytest
from pydantic import ValidationError

from opera_forge.config.config import (
    AppConfig,
    LoggingSettings,
    OutputSettings,
    RuntimeSettings,
)
from opera_forge.core.types import EncoderKind, PretrainMethod


class TestLoggingSettings:
    """Tests for LoggingSettings model."""

    def test_default_values(self):
        """Test default logging settings."""
        settings = LoggingSettings()
        assert settings.level == "INFO"
        assert settings.show_time is True
        assert settings.show_path is False

    @pytest.mark.parametrize("level", ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    def test_valid_log_levels(self, level: str):
        """Test valid log levels are accepted."""
        assert LoggingSettings(level=level).level == level

    def test_case_insensitive_level(self):
        """Test log level validation is case-insensitive."""
        assert LoggingSettings(level="debug").level == "DEBUG"
        assert LoggingSettings(level="Warning").level == "WARNING"

    def test_invalid_log_level(self):
        """Test invalid log level raises ValidationError."""
        with pytest.raises(ValidationError) as exc_info:
            LoggingSettings(level="INVALID")

        error = exc_info.value.errors()[0]
        assert "Invalid logging level" in str(error["ctx"]["error"])

    def test_get_level_int(self):
        """Test get_level_int returns correct integer values."""
        assert LoggingSettings(level="DEBUG").get_level_int() == logging.DEBUG
        assert LoggingSettings(level="ERROR").get_level_int() == logging.ERROR

    def test_frozen(self):
        """Test settings cannot be mutated after validation."""
        settings = LoggingSettings()
        with pytest.raises(ValidationError):
            settings.level = "DEBUG"


class TestOutputSettings:
    """Tests for OutputSettings model."""

    def test_string_becomes_path(self):
        """Test the directory is coerced to a Path."""
        settings = OutputSettings(directory="/tmp/opera")
        assert settings.directory == Path("/tmp/opera")

    def test_extra_fields_rejected(self):
        """Test unknown keys are rejected."""
        with pytest.raises(ValidationError):
            OutputSettings(directory="/tmp", formats=["json"])


class TestRuntimeSettings:
    """Tests for RuntimeSettings model."""

    def test_negative_seed_rejected(self):
        """Test seeds must be non-negative."""
        with pytest.raises(ValidationError):
            RuntimeSettings(seed=-1)

    def test_zero_threads_rejected(self):
        """Test at least one worker is required."""
        with pytest.raises(ValidationError):
            RuntimeSettings(threads=0)


class TestAppConfig:
    """Tests for the aggregate AppConfig model."""

    def test_defaults(self):
        """Test every section has working defaults."""
        config = AppConfig()
        assert config.dsp.target_rate == 16000
        assert config.dsp.n_mels == 64
        assert config.encoder.kind == EncoderKind.VIT
        assert config.pretrain.method == PretrainMethod.CONTRASTIVE
        assert config.probe.lr == pytest.approx(1e-3)
        assert config.synth.n_subjects == 20

    def test_nested_dicts_are_validated(self):
        """Test plain dicts are validated into the section models."""
        config = AppConfig(
            logging={"level": "debug"},
            pretrain={"method": "hybrid", "epochs": 3},
            encoder={"kind": "cnn"},
        )
        assert config.logging.level == "DEBUG"
        assert config.pretrain.method == PretrainMethod.HYBRID
        assert config.pretrain.epochs == 3
        assert config.encoder.kind == EncoderKind.CNN

    def test_invalid_section_value(self):
        """Test an out-of-range nested value fails validation."""
        with pytest.raises(ValidationError):
            AppConfig(pretrain={"mask_ratio": 1.5})

    def test_unknown_section_rejected(self):
        """Test unknown top-level sections are rejected."""
        with pytest.raises(ValidationError):
            AppConfig(backends={})
