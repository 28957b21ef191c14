"""Shared fixtures for settings tests."""

from pathlib import Path

import pytest
from pydantic import BaseModel, ConfigDict, Field


class FakeRuntime(BaseModel):
    model_config = ConfigDict(extra="forbid")
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)


class FakeOutput(BaseModel):
    model_config = ConfigDict(extra="forbid")
    directory: Path = Field(default=Path("opera-forge-out"))


class FakePretrain(BaseModel):
    model_config = ConfigDict(extra="forbid")
    method: str = Field(default="contrastive")
    epochs: int = Field(default=30, ge=1)
    mask_ratio: float = Field(default=0.7, gt=0.0, lt=1.0)


class FakeCoreConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    runtime: FakeRuntime = Field(default_factory=FakeRuntime)
    output: FakeOutput = Field(default_factory=FakeOutput)
    pretrain: FakePretrain = Field(default_factory=FakePretrain)


class FakeUnifiedConfig(BaseModel):
    model_config = ConfigDict(frozen=True)
    core: FakeCoreConfig


@pytest.fixture
def core_defaults_toml(tmp_path: Path) -> Path:
    """Package defaults file (flat sections)."""
    content = """\
[runtime]
seed = 0
threads = 1

[output]
directory = "opera-forge-out"

[pretrain]
method = "contrastive"
epochs = 30
mask_ratio = 0.7
"""
    file_path = tmp_path / "core_settings.toml"
    file_path.write_text(content)
    return file_path


@pytest.fixture
def project_dir(tmp_path: Path) -> Path:
    """Project directory whose settings.toml uses namespaced sections."""
    project = tmp_path / "project"
    project.mkdir()
    (project / "settings.toml").write_text("""\
[core.pretrain]
epochs = 12

[core.runtime]
threads = 4
""")
    return project


@pytest.fixture
def flat_config_file(tmp_path: Path) -> Path:
    """An explicit --config file written with flat sections."""
    file_path = tmp_path / "run.toml"
    file_path.write_text("""\
[pretrain]
method = "generative"
epochs = 3
""")
    return file_path
