"""Waveforms: WAV I/O, resampling, mono mixdown and silence trimming."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import soundfile as sf
from scipy import signal

from opera_forge.core.exceptions import DataIOError, InvalidInputError

logger = logging.getLogger(__name__)

DEFAULT_KAISER_BETA = 5.0


@dataclass(frozen=True)
class WaveForm:
    """Audio samples laid out as ``(n_samples, channels)`` float32.

    Attributes:
        samples: 2-D array, one column per channel
        sample_rate: Rate in Hz
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[1] < 1:
            raise InvalidInputError(
                "waveform", f"expected (n, channels) samples, got {samples.shape}"
            )
        if self.sample_rate <= 0:
            raise InvalidInputError("waveform", f"sample rate {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("waveform", "non-finite samples")
        object.__setattr__(self, "samples", samples)

    @property
    def channels(self) -> int:
        return int(self.samples.shape[1])

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    def mono(self) -> np.ndarray:
        """First channel as a 1-D array. Call ``mix_mono`` first for stereo."""
        return self.samples[:, 0]


def read_wav(path: Path) -> WaveForm:
    """Read a WAV file (PCM 16/24/32 or float) into a float32 WaveForm.

    Raises:
        DataIOError: If the file cannot be opened or decoded
    """
    try:
        data, rate = sf.read(str(path), dtype="float32", always_2d=True)
    except (sf.SoundFileError, OSError) as e:
        raise DataIOError(str(path), str(e)) from e
    logger.debug(
        "Read %s: %d samples, %d Hz, %d ch", path, data.shape[0], rate, data.shape[1]
    )
    return WaveForm(samples=data, sample_rate=int(rate))


def write_wav(path: Path, wave: WaveForm, subtype: str = "PCM_16") -> None:
    """Write a WaveForm as WAV.

    Raises:
        DataIOError: If the file cannot be written
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        sf.write(str(path), wave.samples, wave.sample_rate, subtype=subtype)
    except (sf.SoundFileError, OSError) as e:
        raise DataIOError(str(path), str(e)) from e


def resample(
    wave: WaveForm, target_rate: int, kaiser_beta: float = DEFAULT_KAISER_BETA
) -> WaveForm:
    """Polyphase resampling with a Kaiser-windowed sinc anti-aliasing filter.

    The output holds ``round(n * target / source)`` samples.

    Raises:
        InvalidInputError: If ``target_rate`` is not positive
    """
    if target_rate <= 0:
        raise InvalidInputError("target rate", str(target_rate))
    if target_rate == wave.sample_rate:
        return WaveForm(samples=wave.samples.copy(), sample_rate=target_rate)

    g = math.gcd(target_rate, wave.sample_rate)
    up, down = target_rate // g, wave.sample_rate // g
    out = signal.resample_poly(
        wave.samples.astype(np.float64),
        up,
        down,
        axis=0,
        window=("kaiser", kaiser_beta),
    )

    n_out = int(math.floor(wave.n_samples * target_rate / wave.sample_rate + 0.5))
    if out.shape[0] >= n_out:
        out = out[:n_out]
    else:
        out = np.pad(out, ((0, n_out - out.shape[0]), (0, 0)))
    return WaveForm(samples=out.astype(np.float32), sample_rate=target_rate)


def mix_mono(wave: WaveForm) -> WaveForm:
    """Average all channels into one."""
    if wave.channels == 1:
        return wave
    return WaveForm(
        samples=wave.samples.mean(axis=1, keepdims=True), sample_rate=wave.sample_rate
    )


def _window_rms(x: np.ndarray, win: int) -> np.ndarray:
    n_windows = -(-x.size // win)
    padded = np.zeros(n_windows * win, dtype=np.float64)
    padded[: x.size] = x
    frames = padded.reshape(n_windows, win)
    # a partial last window is averaged over its real samples only
    counts = np.full(n_windows, win, dtype=np.float64)
    counts[-1] = x.size - (n_windows - 1) * win
    return np.sqrt((frames**2).sum(axis=1) / counts)


def trim_silence(
    wave: WaveForm, floor_db: float = 40.0, window_ms: float = 25.0
) -> tuple[WaveForm, int, int]:
    """Drop leading and trailing windows quieter than the peak by ``floor_db``.

    Windows are non-overlapping and aligned to the first sample, so trimming
    an already trimmed clip is a no-op.

    Returns:
        ``(trimmed, start, end)`` with ``trimmed = wave[start:end]``. A silent
        clip gives ``start == end == 0`` and an empty waveform.
    """
    x = mix_mono(wave).mono()
    win = max(1, int(round(wave.sample_rate * window_ms / 1000.0)))
    if x.size == 0:
        return wave, 0, 0

    rms = _window_rms(x, win)
    peak = float(rms.max())
    if peak <= 0.0:
        empty = WaveForm(
            samples=np.zeros((0, wave.channels), dtype=np.float32),
            sample_rate=wave.sample_rate,
        )
        return empty, 0, 0

    threshold = peak * 10.0 ** (-floor_db / 20.0)
    loud = np.flatnonzero(rms > threshold)
    start = int(loud[0]) * win
    end = min((int(loud[-1]) + 1) * win, x.size)
    trimmed = WaveForm(samples=wave.samples[start:end], sample_rate=wave.sample_rate)
    return trimmed, start, end
