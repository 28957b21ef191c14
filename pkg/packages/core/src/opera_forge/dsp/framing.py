"""Padding, random cropping and segmentation along the time axis."""

from functools import singledispatch

import numpy as np

from opera_forge.core.exceptions import ContractError
from opera_forge.core.types import PadPolicy
from opera_forge.dsp.audio import WaveForm
from opera_forge.dsp.spectrogram import Spectrogram


def pad_array(
    values: np.ndarray, target_len: int, policy: PadPolicy, fill: float = 0.0
) -> np.ndarray:
    """Pad ``values`` along axis 0 to ``target_len``; longer input is returned as is.

    ``repeat`` tiles the content cyclically (``out[i] = values[i % n]``);
    ``zero`` appends ``fill``.
    """
    if target_len < 1:
        raise ContractError("pad", f"target length must be >= 1, got {target_len}")
    n = values.shape[0]
    if n >= target_len:
        return values
    if policy == PadPolicy.REPEAT:
        if n == 0:
            raise ContractError("pad", "cannot repeat-pad empty content")
        return np.take(values, np.arange(target_len) % n, axis=0)
    tail = np.full((target_len - n, *values.shape[1:]), fill, dtype=values.dtype)
    return np.concatenate([values, tail], axis=0)


@singledispatch
def pad(x: object, target_len: int, policy: PadPolicy) -> object:
    """Pad a waveform, spectrogram or array to ``target_len`` along time.

    Zero padding of a Spectrogram uses its normalized silence value.
    """
    raise TypeError(f"cannot pad {type(x).__name__}")


@pad.register
def _(x: np.ndarray, target_len: int, policy: PadPolicy) -> np.ndarray:
    return pad_array(x, target_len, policy)


@pad.register
def _(x: WaveForm, target_len: int, policy: PadPolicy) -> WaveForm:
    if x.n_samples >= target_len:
        return x
    return WaveForm(
        samples=pad_array(x.samples, target_len, policy), sample_rate=x.sample_rate
    )


@pad.register
def _(x: Spectrogram, target_len: int, policy: PadPolicy) -> Spectrogram:
    if x.n_frames >= target_len:
        return x
    return x.with_values(pad_array(x.values, target_len, policy, fill=x.floor))


def random_crop(
    spec: Spectrogram, len_frames: int, rng: np.random.Generator
) -> Spectrogram:
    """Contiguous window of ``len_frames`` frames with a uniformly drawn start.

    Raises:
        ContractError: If the spectrogram is shorter than the crop
    """
    if len_frames < 1:
        raise ContractError("random_crop", f"crop length {len_frames} < 1")
    if len_frames > spec.n_frames:
        raise ContractError(
            "random_crop",
            f"crop of {len_frames} frames exceeds {spec.n_frames} frames; "
            "repeat-pad first",
        )
    start = int(rng.integers(0, spec.n_frames - len_frames + 1))
    return spec.with_values(spec.values[start : start + len_frames])


def segment_starts(n_frames: int, frame_len: int, hop: int) -> list[int]:
    """Segment starts with a right-aligned tail segment when needed."""
    if n_frames <= frame_len:
        return [0]
    starts = list(range(0, n_frames - frame_len + 1, hop))
    if starts[-1] + frame_len < n_frames:
        starts.append(n_frames - frame_len)
    return starts


def segment_frames(spec: Spectrogram, frame_len: int, hop: int) -> list[Spectrogram]:
    """Cut a spectrogram into overlapping ``frame_len`` windows every ``hop`` frames.

    A spectrogram shorter than one window yields a single repeat-padded segment.
    """
    if frame_len < 1 or hop < 1:
        raise ContractError(
            "segment_frames", f"frame_len={frame_len} and hop={hop} must be >= 1"
        )
    if spec.n_frames < frame_len:
        return [pad(spec, frame_len, PadPolicy.REPEAT)]
    return [
        spec.with_values(spec.values[s : s + frame_len])
        for s in segment_starts(spec.n_frames, frame_len, hop)
    ]


def pad_to_multiple(spec: Spectrogram, multiple: int) -> Spectrogram:
    """Zero-pad (normalized silence) until the frame count divides by ``multiple``."""
    if multiple < 1:
        raise ContractError("pad_to_multiple", f"multiple must be >= 1, got {multiple}")
    extra = -spec.n_frames % multiple
    if not extra:
        return spec
    return pad(spec, spec.n_frames + extra, PadPolicy.ZERO)
