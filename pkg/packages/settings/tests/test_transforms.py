"""Tests for raw settings transformations."""

from opera_forge_settings.transforms import (
    convert_keys_to_lowercase,
    parse_env_vars,
    resolve_environment_variables,
)


class TestParseEnvVars:
    """Tests for OPERAFORGE_SECTION__KEY parsing."""

    def test_section_and_key(self):
        result = parse_env_vars({"OPERAFORGE_PRETRAIN__EPOCHS": "5"})
        assert result == {"pretrain": {"epochs": "5"}}

    def test_ignores_unrelated_and_malformed(self):
        result = parse_env_vars(
            {"HOME": "/root", "OPERAFORGE_NOSEPARATOR": "x", "OPERAFORGE___KEY": "y"}
        )
        assert result == {}

    def test_output_env_var(self):
        result = parse_env_vars({"OPERA_FORGE_OUT": "/data/out"})
        assert result == {"output": {"directory": "/data/out"}}

    def test_output_env_var_wins_over_prefixed(self):
        result = parse_env_vars(
            {
                "OPERAFORGE_OUTPUT__DIRECTORY": "/a",
                "OPERA_FORGE_OUT": "/b",
            }
        )
        assert result["output"]["directory"] == "/b"


class TestKeyAndValueTransforms:
    def test_lowercase_nested(self):
        assert convert_keys_to_lowercase({"A": {"B": 1}}) == {"a": {"b": 1}}

    def test_resolve_env(self, monkeypatch):
        monkeypatch.setenv("OPERA_TEST_ROOT", "/mnt")
        data = {"directory": "$OPERA_TEST_ROOT/out", "items": ["$OPERA_TEST_ROOT"]}
        assert resolve_environment_variables(data) == {
            "directory": "/mnt/out",
            "items": ["/mnt"],
        }
