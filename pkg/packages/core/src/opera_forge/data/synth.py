"""Synthetic respiratory-audio corpus.

Each clip is band-passed noise shaped by raised-cosine breathing cycles.
Labels: ``rate`` (breaths per minute) and ``wheeze`` (0/1). A wheezing clip
carries narrowband tone bursts during each inhalation. Every subject has its
own noise band, so timbre is consistent within a subject.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import signal

from opera_forge.core.types import Modality
from opera_forge.data.manifest import ClipRecord, Manifest, write_manifest
from opera_forge.dsp.audio import WaveForm, write_wav

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
ENVELOPE_FLOOR = 0.02
PEAK_LEVEL = 0.7
WHEEZE_LEVEL = 0.6


class SynthConfig(BaseModel):
    """Shape of the synthetic corpus."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_subjects: int = Field(default=20, ge=1)
    clips_per_subject: int = Field(default=10, ge=1)
    duration_s: float = Field(default=8.0, gt=0.0)
    sample_rate: int = Field(default=16000, gt=0)
    rate_min: float = Field(default=8.0, gt=0.0, description="Breaths per minute")
    rate_max: float = Field(default=25.0, gt=0.0, description="Breaths per minute")
    wheeze_probability: float = Field(default=0.3, ge=0.0, le=1.0)
    timbre_min_hz: float = Field(default=300.0, gt=0.0)
    timbre_max_hz: float = Field(default=1200.0, gt=0.0)
    timbre_spread: float = Field(
        default=0.3, gt=0.0, lt=1.0, description="Band half-width relative to centre"
    )
    wheeze_min_hz: float = Field(default=400.0, gt=0.0)
    wheeze_max_hz: float = Field(default=1000.0, gt=0.0)
    seed: int = 0
    source: str = "synth"
    modality: Modality = Modality.BREATH

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthConfig":
        pairs = {
            "rate": (self.rate_min, self.rate_max),
            "timbre": (self.timbre_min_hz, self.timbre_max_hz),
            "wheeze": (self.wheeze_min_hz, self.wheeze_max_hz),
        }
        for name, (low, high) in pairs.items():
            if low > high:
                raise ValueError(f"{name} range is reversed: {low} > {high}")
        nyquist = self.sample_rate / 2
        if self.timbre_max_hz * (1.0 + self.timbre_spread) >= nyquist:
            raise ValueError(f"timbre band reaches Nyquist ({nyquist} Hz)")
        if self.wheeze_max_hz >= nyquist:
            raise ValueError(f"wheeze tone reaches Nyquist ({nyquist} Hz)")
        return self

    @property
    def n_clips(self) -> int:
        return self.n_subjects * self.clips_per_subject


def subject_name(subject: int) -> str:
    return f"s{subject:03d}"


def clip_name(subject: int, clip: int) -> str:
    return f"{subject_name(subject)}-c{clip:03d}"


def subject_timbre(cfg: SynthConfig, subject: int) -> float:
    rng = np.random.default_rng((cfg.seed, 0, subject))
    return float(rng.uniform(cfg.timbre_min_hz, cfg.timbre_max_hz))


def breathing_envelope(
    n_samples: int, sample_rate: int, rate_bpm: float, phase: float
) -> tuple[np.ndarray, np.ndarray]:
    """Raised-cosine amplitude and cycle position in ``[0, 1)`` per sample.

    Inhalation is the first half of each cycle.
    """
    t = np.arange(n_samples) / sample_rate
    cycle = (t * rate_bpm / 60.0 + phase) % 1.0
    shape = 0.5 * (1.0 - np.cos(2.0 * np.pi * cycle))
    return ENVELOPE_FLOOR + (1.0 - ENVELOPE_FLOOR) * shape, cycle


def synthesize_clip(
    cfg: SynthConfig, timbre_hz: float, rng: np.random.Generator
) -> tuple[np.ndarray, dict[str, float | int]]:
    """Samples and labels for one clip."""
    sr = cfg.sample_rate
    n = int(round(cfg.duration_s * sr))
    rate = float(rng.uniform(cfg.rate_min, cfg.rate_max))
    phase = float(rng.uniform(0.0, 1.0))
    wheeze = int(rng.random() < cfg.wheeze_probability)

    envelope, cycle = breathing_envelope(n, sr, rate, phase)
    spread = cfg.timbre_spread
    band = [timbre_hz * (1.0 - spread), timbre_hz * (1.0 + spread)]
    sos = signal.butter(4, band, btype="bandpass", fs=sr, output="sos")
    noise = signal.sosfiltfilt(sos, rng.standard_normal(n))
    noise /= max(float(noise.std()), 1e-12)
    x = envelope * noise

    if wheeze:
        freq = float(rng.uniform(cfg.wheeze_min_hz, cfg.wheeze_max_hz))
        inhale = cycle < 0.5
        gate = np.where(inhale, np.sin(np.pi * cycle / 0.5), 0.0)
        t = np.arange(n) / sr
        x = x + WHEEZE_LEVEL * gate * np.sin(2.0 * np.pi * freq * t)

    peak = float(np.abs(x).max())
    x = x * (PEAK_LEVEL / peak) if peak > 0.0 else x
    return x.astype(np.float32), {"rate": round(rate, 4), "wheeze": wheeze}


def _make_clip(
    cfg: SynthConfig, out_dir: Path, subject: int, clip: int, timbre_hz: float
) -> ClipRecord:
    index = subject * cfg.clips_per_subject + clip
    rng = np.random.default_rng((cfg.seed, 1, index))
    samples, labels = synthesize_clip(cfg, timbre_hz, rng)
    relative = Path("clips") / f"s{subject:03d}_c{clip:03d}.wav"
    wave = WaveForm(samples=samples, sample_rate=cfg.sample_rate)
    write_wav(out_dir / relative, wave)
    return ClipRecord(
        id=clip_name(subject, clip),
        path=out_dir / relative,
        subject_id=subject_name(subject),
        source=cfg.source,
        modality=cfg.modality,
        labels=labels,
        duration_s=samples.shape[0] / cfg.sample_rate,
    )


def synth_corpus(cfg: SynthConfig, out_dir: Path, threads: int = 1) -> Manifest:
    """Write the corpus WAVs (16-bit PCM) and ``manifest.jsonl`` under ``out_dir``.

    Clip ``i`` draws from its own generator seeded by ``(seed, i)``, so the
    output is identical for any ``threads``.

    Raises:
        DataIOError: If a file cannot be written
    """
    timbres = [subject_timbre(cfg, s) for s in range(cfg.n_subjects)]
    jobs = [
        (s, c) for s in range(cfg.n_subjects) for c in range(cfg.clips_per_subject)
    ]
    logger.info("Synthesizing %d clips into %s", len(jobs), out_dir)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        records = list(
            pool.map(lambda job: _make_clip(cfg, out_dir, *job, timbres[job[0]]), jobs)
        )
    manifest = Manifest(
        records=tuple(records),
        provenance=(
            f"synthetic corpus: seed={cfg.seed}, subjects={cfg.n_subjects}, "
            f"clips_per_subject={cfg.clips_per_subject}"
        ),
    )
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    return manifest
