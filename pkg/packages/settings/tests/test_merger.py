"""Tests for layer merging."""

from pathlib import Path

from opera_forge_settings.loader import LayerSource
from opera_forge_settings.merger import deep_merge, leaf_keys, merge_layers


class TestDeepMerge:
    def test_nested_dicts_merge(self):
        base = {"pretrain": {"epochs": 30, "method": "contrastive"}}
        override = {"pretrain": {"epochs": 5}}
        assert deep_merge(base, override) == {
            "pretrain": {"epochs": 5, "method": "contrastive"}
        }

    def test_lists_replace(self):
        assert deep_merge({"a": [1, 2]}, {"a": [3]}) == {"a": [3]}

    def test_inputs_not_mutated(self):
        base = {"a": {"b": 1}}
        deep_merge(base, {"a": {"b": 2}})
        assert base == {"a": {"b": 1}}


class TestMergeLayers:
    def test_later_layers_win_and_layers_tracked(self):
        layers = [
            LayerSource("package", "core", Path("d.toml"), {"runtime": {"seed": 0}}),
            LayerSource("env", "core", None, {"runtime": {"seed": "7"}}),
        ]
        merged = merge_layers(layers)
        assert merged.data["core"]["runtime"]["seed"] == "7"
        assert merged.layers["core"] == ["package", "env"]

    def test_key_origins(self):
        layers = [
            LayerSource(
                "package",
                "core",
                Path("d.toml"),
                {"runtime": {"seed": 0, "threads": 1}},
            ),
            LayerSource("config", "core", Path("run.toml"), {"Runtime": {"Seed": 3}}),
        ]
        merged = merge_layers(layers)
        assert merged.origin_of("core", "runtime.seed") == "config (run.toml)"
        assert merged.origin_of("core", "runtime.threads") == "package (d.toml)"
        assert merged.origin_of("core", "runtime.seed.extra") == "config (run.toml)"
        assert merged.origin_of("core", "output.directory") is None

    def test_leaf_keys(self):
        data = {"pretrain": {"crop_frames": {"*/cough": 63}, "epochs": 2}}
        assert sorted(leaf_keys(data)) == [
            "pretrain.crop_frames.*/cough",
            "pretrain.epochs",
        ]
