"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from opera_forge.dsp.audio import WaveForm
from opera_forge.dsp.spectrogram import DspConfig, Spectrogram
from opera_forge.models.config import EncoderConfig


@pytest.fixture
def dsp_cfg() -> DspConfig:
    """Default preprocessing constants."""
    return DspConfig()


@pytest.fixture
def tone() -> WaveForm:
    """One second of a 1 kHz sine at 16 kHz."""
    t = np.arange(16000) / 16000.0
    return WaveForm(samples=0.5 * np.sin(2 * np.pi * 1000.0 * t), sample_rate=16000)


@pytest.fixture
def tiny_vit_cfg() -> EncoderConfig:
    """A ViT small enough for gradient steps in unit tests."""
    return EncoderConfig(
        kind="vit",
        n_mels=8,
        embed_dim=8,
        depth=1,
        heads=2,
        mlp_ratio=2.0,
        patch_size=4,
        max_positions=64,
        max_input_frames=32,
        projector_dim=8,
        decoder_dim=8,
        decoder_depth=1,
        decoder_heads=2,
    )


@pytest.fixture
def tiny_cnn_cfg() -> EncoderConfig:
    """A three-block CNN over 16 mel bins."""
    return EncoderConfig(
        kind="cnn",
        n_mels=16,
        embed_dim=8,
        cnn_channels=(2, 4, 8),
        max_input_frames=32,
        projector_dim=8,
    )


@pytest.fixture
def make_spec():
    """Factory for random spectrograms with a fixed seed."""

    def _make(n_frames: int, n_mels: int = 8, seed: int = 0, source_id: str = "c"):
        rng = np.random.default_rng(seed)
        values = rng.normal(size=(n_frames, n_mels)).astype(np.float32)
        return Spectrogram(values=values, source_id=source_id, floor=-3.0)

    return _make


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Synthetic corpus of 6 subjects x 4 two-second clips, written once."""
    from opera_forge.data.synth import SynthConfig, synth_corpus

    out = tmp_path_factory.mktemp("corpus")
    cfg = SynthConfig(n_subjects=6, clips_per_subject=4, duration_s=2.0, seed=3)
    manifest = synth_corpus(cfg, out)
    return out, manifest


@pytest.fixture(scope="session")
def small_cache(small_corpus, tmp_path_factory):
    """Spectrogram cache of the small corpus at 16 mel bins."""
    from opera_forge.data.curation import preprocess_manifest

    _, manifest = small_corpus
    out = tmp_path_factory.mktemp("cache")
    return out, preprocess_manifest(manifest, DspConfig(n_mels=16), out)
