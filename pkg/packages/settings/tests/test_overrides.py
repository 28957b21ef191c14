"""Tests for command-line override application."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from opera_forge_settings.errors import SettingsOverrideError
from opera_forge_settings.overrides import apply_overrides

from .conftest import FakeCoreConfig, FakeUnifiedConfig


@pytest.fixture
def base_config() -> FakeUnifiedConfig:
    return FakeUnifiedConfig(core=FakeCoreConfig())


class TestApplyOverrides:
    def test_override_scalar(self, base_config):
        result = apply_overrides(base_config, {"core.runtime.seed": 3})
        assert result.core.runtime.seed == 3
        assert base_config.core.runtime.seed == 0

    def test_override_path(self, base_config):
        result = apply_overrides(base_config, {"core.output.directory": Path("/x")})
        assert result.core.output.directory == Path("/x")

    def test_none_values_skipped(self, base_config):
        result = apply_overrides(base_config, {"core.runtime.seed": None})
        assert result is base_config

    def test_unknown_key_suggests(self, base_config):
        with pytest.raises(SettingsOverrideError) as exc_info:
            apply_overrides(base_config, {"core.runtime.sede": 1})
        assert exc_info.value.suggestion == "core.runtime.seed"

    def test_unknown_section(self, base_config):
        with pytest.raises(SettingsOverrideError):
            apply_overrides(base_config, {"core.nothing.here": 1})

    def test_revalidates(self, base_config):
        with pytest.raises(ValidationError):
            apply_overrides(base_config, {"core.pretrain.mask_ratio": 1.5})
