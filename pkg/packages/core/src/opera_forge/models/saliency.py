"""Input-gradient saliency maps."""

import logging
from collections.abc import Callable
from pathlib import Path

import numpy as np
from PIL import Image

from opera_forge.autodiff import ops
from opera_forge.autodiff.tensor import Tensor, backward
from opera_forge.core.exceptions import ContractError, DataIOError
from opera_forge.dsp.spectrogram import Spectrogram
from opera_forge.models.checkpoint import Encoder

logger = logging.getLogger(__name__)


def saliency(
    scalar_fn: Callable[[Tensor], Tensor], spec: Spectrogram | np.ndarray
) -> np.ndarray:
    """``|d scalar / d spec|`` for every cell of a ``(F, M)`` spectrogram.

    Raises:
        ContractError: If ``scalar_fn`` does not return a single value
    """
    values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec)
    x = Tensor(values, requires_grad=True, dtype=values.dtype)
    out = scalar_fn(x)
    if out.data.size != 1:
        raise ContractError("saliency", f"target must be scalar, got shape {out.shape}")
    backward(out)
    if x.grad is None:
        return np.zeros(values.shape, dtype=np.float64)
    return np.abs(x.grad).astype(np.float64)


def embedding_energy(encoder: Encoder, floor: float) -> Callable[[Tensor], Tensor]:
    """Scalar head: squared L2 norm of the encoder embedding of one spectrogram.

    Frames are filled with ``floor``, the clip's normalized silence, up to the
    encoder's frame multiple; the padding gets no saliency of its own.
    """
    multiple = encoder.cfg.frame_multiple

    def fn(x: Tensor) -> Tensor:
        extra = -x.shape[0] % multiple
        if extra:
            fill = np.full((extra, x.shape[1]), floor, dtype=x.data.dtype)
            x = ops.concat([x, Tensor.constant(fill)], axis=0)
        z = encoder(ops.reshape(x, (1, *x.shape)))
        return ops.reduce_sum(ops.mul(z, z))

    return fn


def saliency_image(saliency_map: np.ndarray) -> Image.Image:
    """8-bit grayscale heat image, mel bins bottom-up, frames left to right."""
    peak = float(saliency_map.max()) if saliency_map.size else 0.0
    scaled = saliency_map / peak if peak > 0.0 else np.zeros_like(saliency_map)
    pixels = np.round(np.flipud(scaled.T) * 255.0).astype(np.uint8)
    return Image.fromarray(pixels)


def write_saliency_png(path: Path, saliency_map: np.ndarray) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        saliency_image(saliency_map).save(path, format="PNG")
    except OSError as e:
        raise DataIOError(str(path), str(e)) from e
    logger.info("Wrote saliency image %s", path)
