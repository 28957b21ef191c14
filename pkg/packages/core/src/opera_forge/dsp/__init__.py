"""Deterministic audio preprocessing.

Resampling, mono mixdown, silence trimming, log-mel spectrograms, padding,
cropping and segmentation. Every function is pure; randomness comes in
through an explicit ``numpy.random.Generator``.
"""

from opera_forge.dsp.audio import (
    WaveForm,
    mix_mono,
    read_wav,
    resample,
    trim_silence,
    write_wav,
)
from opera_forge.dsp.cache import read_spectrogram, write_spectrogram
from opera_forge.dsp.framing import (
    pad,
    pad_to_multiple,
    random_crop,
    segment_frames,
)
from opera_forge.dsp.spectrogram import (
    DspConfig,
    MelFilterbank,
    Spectrogram,
    build_filterbank,
    log_mel,
)

__all__ = [
    "DspConfig",
    "MelFilterbank",
    "Spectrogram",
    "WaveForm",
    "build_filterbank",
    "log_mel",
    "mix_mono",
    "pad",
    "pad_to_multiple",
    "random_crop",
    "read_spectrogram",
    "read_wav",
    "resample",
    "segment_frames",
    "trim_silence",
    "write_spectrogram",
    "write_wav",
]
