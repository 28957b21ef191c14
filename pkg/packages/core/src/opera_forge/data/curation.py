"""Audio curation and the spectrogram cache.

``preprocess_manifest`` turns an audio manifest into a cache manifest whose
records point at ``OPSG`` files and whose header holds the corpus
normalization constants.
"""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from opera_forge.core.exceptions import ConfigError, InvalidInputError
from opera_forge.data.batching import SpectrogramLoader
from opera_forge.data.manifest import ClipRecord, Manifest, write_manifest
from opera_forge.dsp.audio import mix_mono, read_wav, resample, trim_silence
from opera_forge.dsp.cache import read_spectrogram, write_spectrogram
from opera_forge.dsp.spectrogram import (
    DspConfig,
    Spectrogram,
    build_filterbank,
    log_mel,
)

logger = logging.getLogger(__name__)

CACHE_MANIFEST_NAME = "cache.jsonl"
SPECTROGRAM_DIRNAME = "spectrograms"
AUDIO_SUFFIXES = (".wav", ".flac")


def raw_config(cfg: DspConfig) -> DspConfig:
    """Same transform without normalization."""
    return cfg.model_copy(update={"norm_mean": 0.0, "norm_std": 1.0})


def curate_audio(path: Path, cfg: DspConfig, clip_id: str) -> Spectrogram | None:
    """Read, mix to mono, resample, trim silence and take the log-mel.

    Returns:
        The spectrogram, or None for a clip that is silent or shorter than
        one hop after trimming (logged as a warning)
    """
    wave = resample(mix_mono(read_wav(path)), cfg.target_rate, cfg.kaiser_beta)
    trimmed, start, end = trim_silence(
        wave, cfg.silence_floor_db, cfg.silence_window_ms
    )
    if trimmed.n_samples < cfg.hop_length:
        logger.warning("Skipping clip '%s': silent after trimming", clip_id)
        return None
    logger.debug("Trimmed '%s' to samples %d..%d", clip_id, start, end)
    return log_mel(trimmed, cfg, source_id=clip_id, filterbank=build_filterbank(cfg))


def curate_clip(record: ClipRecord, cfg: DspConfig) -> Spectrogram | None:
    return curate_audio(record.path, cfg, record.id)


def corpus_config(manifest: Manifest, cfg: DspConfig) -> DspConfig:
    """``cfg`` with the normalization constants of a cache manifest."""
    return cfg.model_copy(
        update={"norm_mean": manifest.norm_mean, "norm_std": manifest.norm_std}
    )


def clip_spectrogram(
    path: Path, cfg: DspConfig, manifest: Manifest | None = None
) -> Spectrogram:
    """Spectrogram of a loose audio or ``OPSG`` file, as the cache would hold it.

    Audio goes through ``curate_audio``. A cache manifest, when given, supplies
    the normalization constants; otherwise those of ``cfg`` apply.

    Raises:
        InvalidInputError: If the audio is silent after trimming
    """
    if manifest is not None:
        cfg = corpus_config(manifest, cfg)
    if path.suffix.lower() not in AUDIO_SUFFIXES:
        return read_spectrogram(path, source_id=path.stem, floor=cfg.silence_value)
    spec = curate_audio(path, cfg, path.stem)
    if spec is None:
        raise InvalidInputError(str(path), "clip is silent after trimming")
    return spec


def compute_normalization(spectrograms: Sequence[Spectrogram]) -> tuple[float, float]:
    """Mean and standard deviation over every cell of every spectrogram.

    Raises:
        ConfigError: If there is nothing to measure or the values are constant
    """
    total = 0.0
    total_sq = 0.0
    count = 0
    for spec in spectrograms:
        values = spec.values.astype(np.float64)
        total += float(values.sum())
        total_sq += float((values * values).sum())
        count += values.size
    if count == 0:
        raise ConfigError("normalization", "no spectrogram cells to measure")
    mean = total / count
    std = math.sqrt(max(total_sq / count - mean * mean, 0.0))
    if std <= 0.0:
        raise ConfigError("normalization", "spectrogram values are constant")
    return mean, std


def preprocess_manifest(
    manifest: Manifest, cfg: DspConfig, out_dir: Path, threads: int = 1
) -> Manifest:
    """Curate every clip, normalize with corpus statistics and cache to disk.

    Writes ``spectrograms/<id>.opsg`` and ``cache.jsonl`` under ``out_dir``.
    Silent clips are left out of the cache manifest.
    """
    raw = raw_config(cfg)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        curated = list(pool.map(lambda r: curate_clip(r, raw), manifest.records))
    pairs = zip(manifest.records, curated, strict=True)
    kept = [(r, s) for r, s in pairs if s is not None]
    mean, std = compute_normalization([s for _, s in kept])
    logger.info(
        "Corpus log-mel mean %.4f, std %.4f over %d clips", mean, std, len(kept)
    )

    records = []
    for record, spec in kept:
        path = out_dir / SPECTROGRAM_DIRNAME / f"{record.id}.opsg"
        write_spectrogram(path, (spec.values.astype(np.float64) - mean) / std)
        records.append(record.model_copy(update={"path": path}))
    cache = Manifest(
        records=tuple(records),
        norm_mean=mean,
        norm_std=std,
        provenance=f"spectrogram cache of {len(records)} clips; {manifest.provenance}",
    )
    write_manifest(cache, out_dir / CACHE_MANIFEST_NAME)
    return cache


def silence_floor(manifest: Manifest, cfg: DspConfig) -> float:
    """Normalized value of digital silence under the manifest's constants."""
    return corpus_config(manifest, cfg).silence_value


def spectrogram_loader(manifest: Manifest, cfg: DspConfig) -> SpectrogramLoader:
    """Reader for records of a cache manifest."""
    floor = silence_floor(manifest, cfg)

    def load(record: ClipRecord) -> Spectrogram:
        return read_spectrogram(record.path, source_id=record.id, floor=floor)

    return load


def load_spectrogram(
    record: ClipRecord, manifest: Manifest, cfg: DspConfig
) -> Spectrogram:
    return spectrogram_loader(manifest, cfg)(record)
