"""Manifests, pretraining batches, splits, curation and the synthetic corpus."""

from opera_forge.data.batching import PretrainBatch, build_pretrain_batches
from opera_forge.data.curation import (
    compute_normalization,
    curate_clip,
    preprocess_manifest,
    spectrogram_loader,
)
from opera_forge.data.manifest import (
    ClipRecord,
    Manifest,
    load_manifest,
    write_manifest,
)
from opera_forge.data.splits import (
    SplitPlan,
    assert_no_leakage,
    loso_splits,
    split_official,
    split_participant_independent,
)
from opera_forge.data.synth import SynthConfig, synth_corpus

__all__ = [
    "ClipRecord",
    "Manifest",
    "PretrainBatch",
    "SplitPlan",
    "SynthConfig",
    "assert_no_leakage",
    "build_pretrain_batches",
    "compute_normalization",
    "curate_clip",
    "load_manifest",
    "loso_splits",
    "preprocess_manifest",
    "spectrogram_loader",
    "split_official",
    "split_participant_independent",
    "synth_corpus",
    "write_manifest",
]
