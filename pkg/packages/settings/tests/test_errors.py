"""Tests for settings error messages."""

from pathlib import Path

from opera_forge_settings.errors import (
    SettingsError,
    SettingsFileError,
    SettingsOverrideError,
    SettingsValidationError,
)


class TestMessages:
    def test_file_error(self):
        err = SettingsFileError(Path("/a.toml"), "bad")
        assert isinstance(err, SettingsError)
        assert str(err) == "Failed to load /a.toml: bad"

    def test_override_hint(self):
        assert "did you mean 'core.runtime.seed'" in str(
            SettingsOverrideError("core.runtime.sed", "core.runtime.seed")
        )

    def test_validation_problems(self):
        err = SettingsValidationError(
            "core", ["runtime.seed: too small", "pretrain.epochz: extra"], ["package"]
        )
        assert "layers: package" in str(err)
        assert "runtime.seed: too small; pretrain.epochz: extra" in str(err)
        assert err.problems[1] == "pretrain.epochz: extra"
