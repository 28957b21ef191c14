"""Log-mel spectrograms on the HTK mel scale."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import signal

from opera_forge.core.exceptions import ConfigError, InvalidInputError
from opera_forge.dsp.audio import WaveForm

logger = logging.getLogger(__name__)


class DspConfig(BaseModel):
    """Preprocessing parameters: 16 kHz, 64 mels, 64 ms window, 32 ms hop."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    target_rate: int = Field(default=16000, gt=0, description="Sample rate in Hz")
    n_mels: int = Field(default=64, ge=1, description="Number of mel filters")
    window_ms: float = Field(default=64.0, gt=0.0, description="STFT window length")
    hop_ms: float = Field(default=32.0, gt=0.0, description="STFT hop length")
    fmin: float = Field(default=0.0, ge=0.0, description="Lowest filter edge in Hz")
    fmax: float | None = Field(
        default=None, description="Highest filter edge in Hz (Nyquist when unset)"
    )
    log_offset: float = Field(default=1e-6, gt=0.0, description="log(x + offset)")
    norm_mean: float = Field(default=0.0, description="Corpus log-mel mean")
    norm_std: float = Field(default=1.0, gt=0.0, description="Corpus log-mel std")
    silence_floor_db: float = Field(
        default=40.0, gt=0.0, description="Trim windows this far below the peak"
    )
    silence_window_ms: float = Field(default=25.0, gt=0.0)
    kaiser_beta: float = Field(
        default=5.0, ge=0.0, description="Kaiser window shape of the resampler"
    )

    @model_validator(mode="after")
    def _check_bands(self) -> "DspConfig":
        if self.hop_ms > self.window_ms:
            raise ValueError(
                f"hop_ms ({self.hop_ms}) must not exceed window_ms ({self.window_ms})"
            )
        nyquist = self.target_rate / 2
        top = self.fmax if self.fmax is not None else nyquist
        if not self.fmin < top <= nyquist:
            raise ValueError(
                f"need fmin < fmax <= {nyquist} Hz, got fmin={self.fmin}, fmax={top}"
            )
        if not (math.isfinite(self.norm_mean) and math.isfinite(self.norm_std)):
            raise ValueError("normalization constants must be finite")
        return self

    @property
    def n_fft(self) -> int:
        return int(round(self.target_rate * self.window_ms / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(self.target_rate * self.hop_ms / 1000.0))

    @property
    def upper_hz(self) -> float:
        return self.fmax if self.fmax is not None else self.target_rate / 2

    @property
    def silence_value(self) -> float:
        """Normalized log-mel value of digital silence."""
        return (math.log(self.log_offset) - self.norm_mean) / self.norm_std

    def frames_for_seconds(self, seconds: float) -> int:
        return int(seconds * self.target_rate) // self.hop_length + 1


@dataclass(frozen=True)
class Spectrogram:
    """Normalized log-mel energies, ``values[frame, mel]``.

    Attributes:
        values: float32 matrix of shape ``(n_frames, n_mels)``
        source_id: Identifier of the clip it came from
        floor: Normalized value of silence, used by zero padding
    """

    values: np.ndarray
    source_id: str = ""
    floor: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidInputError(
                "spectrogram",
                f"expected (n_frames >= 1, n_mels >= 1), got {values.shape}",
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError(
                "spectrogram", f"non-finite values in '{self.source_id}'"
            )
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_mels(self) -> int:
        return int(self.values.shape[1])

    def with_values(self, values: np.ndarray) -> "Spectrogram":
        return Spectrogram(values=values, source_id=self.source_id, floor=self.floor)


@dataclass(frozen=True)
class MelFilterbank:
    """Peak-normalized triangular filters, ``weights[mel, fft_bin]``."""

    weights: np.ndarray
    center_hz: np.ndarray

    @property
    def n_mels(self) -> int:
        return int(self.weights.shape[0])


def hz_to_mel(f: np.ndarray | float) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: np.ndarray | float) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def build_filterbank(cfg: DspConfig) -> MelFilterbank:
    """Triangular mel filters between ``fmin`` and ``fmax``, each row peaking at 1.

    Raises:
        ConfigError: If a filter covers no FFT bin (too many mels for n_fft)
    """
    n_bins = cfg.n_fft // 2 + 1
    bin_hz = np.arange(n_bins) * cfg.target_rate / cfg.n_fft

    mel_edges = np.linspace(
        hz_to_mel(cfg.fmin), hz_to_mel(cfg.upper_hz), cfg.n_mels + 2
    )
    hz_edges = mel_to_hz(mel_edges)
    left, center, right = hz_edges[:-2], hz_edges[1:-1], hz_edges[2:]

    rising = (bin_hz[None, :] - left[:, None]) / (center - left)[:, None]
    falling = (right[:, None] - bin_hz[None, :]) / (right - center)[:, None]
    weights = np.maximum(0.0, np.minimum(rising, falling))

    peaks = weights.max(axis=1)
    empty = np.flatnonzero(peaks <= 0.0)
    if empty.size:
        raise ConfigError(
            "n_mels",
            f"{cfg.n_mels} mels leave filter {int(empty[0])} without any of the "
            f"{n_bins} FFT bins (n_fft={cfg.n_fft})",
        )
    weights /= peaks[:, None]
    return MelFilterbank(weights=weights, center_hz=center)


def log_mel(
    wave: WaveForm,
    cfg: DspConfig,
    source_id: str = "",
    filterbank: MelFilterbank | None = None,
) -> Spectrogram:
    """Normalized log-mel spectrogram of a mono waveform at ``cfg.target_rate``.

    Frames are centred: the signal is reflect-padded by ``n_fft // 2`` on both
    sides, so a clip of ``L`` samples yields ``L // hop + 1`` frames.

    Raises:
        InvalidInputError: If the wave is not mono at the target rate, or is
            shorter than one hop
    """
    if wave.channels != 1:
        raise InvalidInputError(
            "waveform", f"expected mono, got {wave.channels} channels"
        )
    if wave.sample_rate != cfg.target_rate:
        raise InvalidInputError(
            "waveform", f"rate {wave.sample_rate} Hz, expected {cfg.target_rate} Hz"
        )
    hop = cfg.hop_length
    if wave.n_samples < hop:
        raise InvalidInputError(
            "waveform", f"{wave.n_samples} samples is shorter than one hop ({hop})"
        )

    fb = filterbank if filterbank is not None else build_filterbank(cfg)
    n_fft = cfg.n_fft
    x = np.pad(wave.mono().astype(np.float64), n_fft // 2, mode="reflect")
    frames = sliding_window_view(x, n_fft)[::hop]

    window = signal.get_window("hann", n_fft, fftbins=True)
    power = np.abs(np.fft.rfft(frames * window, axis=1)) ** 2
    mel = power @ fb.weights.T
    values = (np.log(mel + cfg.log_offset) - cfg.norm_mean) / cfg.norm_std
    return Spectrogram(values=values, source_id=source_id, floor=cfg.silence_value)
