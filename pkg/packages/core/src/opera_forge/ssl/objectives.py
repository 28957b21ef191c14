"""Contrastive, generative and hybrid pretraining objectives."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from opera_forge.autodiff import ops
from opera_forge.autodiff.losses import cross_entropy_logits, masked_mse
from opera_forge.autodiff.tensor import Tensor
from opera_forge.core.exceptions import ConfigError, ContractError
from opera_forge.dsp.framing import pad_to_multiple, random_crop
from opera_forge.dsp.spectrogram import Spectrogram
from opera_forge.models.decoder import MaskedDecoder, reconstruct
from opera_forge.models.heads import BilinearHead
from opera_forge.models.patching import (
    MaskPlan,
    PatchGrid,
    pad_frames,
    patchify_array,
    sample_mask,
)
from opera_forge.models.vit import ViTEncoder


def make_views(
    spec: Spectrogram, crop_frames: int, rng: np.random.Generator
) -> tuple[Spectrogram, Spectrogram]:
    """Two independent random crops of the same length: a positive pair.

    Raises:
        ContractError: If ``crop_frames`` exceeds the (already padded) length
    """
    return random_crop(spec, crop_frames, rng), random_crop(spec, crop_frames, rng)


def contrastive_loss(
    za: Tensor, zb: Tensor, head: BilinearHead, symmetric: bool = False
) -> tuple[Tensor, float]:
    """Cross-entropy over bilinear similarities with in-batch negatives.

    Row ``i`` of ``S = za W zb^T`` scores anchor ``za[i]`` against every
    ``zb[j]``; the positive is the diagonal.

    Returns:
        ``(loss, top1)`` where ``top1`` is the fraction of rows whose
        largest similarity is the diagonal

    Raises:
        ContractError: If the batch holds fewer than two pairs
    """
    batch = za.shape[0]
    if batch < 2:
        raise ContractError("contrastive_loss", f"need B >= 2, got {batch}")
    similarity = head.similarity_matrix(za, zb)
    targets = np.arange(batch)
    loss = cross_entropy_logits(similarity, targets)
    if symmetric:
        reverse = cross_entropy_logits(ops.transpose(similarity), targets)
        loss = ops.scale(ops.add(loss, reverse), 0.5)
    top1 = float(np.mean(np.argmax(similarity.data, axis=1) == targets))
    return loss, top1


@dataclass(frozen=True)
class MaskedBatch:
    """A batch padded to whole patches together with its mask plans."""

    values: np.ndarray
    grid: PatchGrid
    plans: tuple[MaskPlan, ...]

    @property
    def masked(self) -> np.ndarray:
        return np.array([p.masked_indices for p in self.plans], dtype=np.intp)

    @property
    def target(self) -> np.ndarray:
        return patchify_array(self.values, self.grid.patch)


def mask_batch(
    spec_batch: np.ndarray,
    ratio: float,
    rng: np.random.Generator,
    patch: int,
    fill: float | None = None,
) -> MaskedBatch:
    """Pad ``(B, F, M)`` to whole patches and draw one plan per spectrogram.

    ``fill`` is the normalized silence value of the batch. It may be omitted
    when the frame count is already a patch multiple.

    Raises:
        ConfigError: If ``ratio`` is not strictly between 0 and 1
        ContractError: If padding is needed and no ``fill`` is given
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError("mask_ratio", f"{ratio} is outside (0, 1)")
    values = np.asarray(spec_batch)
    if values.shape[1] % patch:
        if fill is None:
            raise ContractError(
                "mask_batch",
                f"{values.shape[1]} frames need a silence fill to reach "
                f"whole {patch}-frame patches",
            )
        values = pad_frames(values, patch, fill)
    grid = PatchGrid.for_shape(values.shape[1], values.shape[2], patch)
    plans = tuple(sample_mask(grid.n_tokens, ratio, rng) for _ in range(len(values)))
    return MaskedBatch(values=values, grid=grid, plans=plans)


def masked_reconstruction_loss(
    batch: MaskedBatch, encoder: ViTEncoder, decoder: MaskedDecoder
) -> Tensor:
    """Mean squared error over the masked patches only."""
    pred, _ = reconstruct(Tensor.constant(batch.values), batch.plans, encoder, decoder)
    return masked_mse(pred, batch.target, batch.masked)


def generative_step(
    spec_batch: Sequence[Spectrogram] | np.ndarray,
    encoder: ViTEncoder,
    decoder: MaskedDecoder,
    ratio: float,
    rng: np.random.Generator,
) -> Tensor:
    """Mask ``ratio`` of each spectrogram's patches and score the reconstruction.

    Spectrograms are filled with their own silence value up to whole patches;
    a bare array must already span whole patches.

    Raises:
        ConfigError: If ``ratio`` is not strictly between 0 and 1
        ContractError: If a bare array needs padding
    """
    patch = encoder.cfg.patch_size
    if isinstance(spec_batch, np.ndarray):
        values = spec_batch
    else:
        values = np.stack([pad_to_multiple(s, patch).values for s in spec_batch])
    batch = mask_batch(values, ratio, rng, patch)
    return masked_reconstruction_loss(batch, encoder, decoder)


def mean_predictor_baseline(batch: MaskedBatch) -> float:
    """Masked MSE of predicting every hidden cell by the mean of the visible cells."""
    target = batch.target
    errors = []
    for i, plan in enumerate(batch.plans):
        visible = target[i, list(plan.visible_indices)]
        hidden = target[i, list(plan.masked_indices)]
        errors.append(float(np.mean((hidden - visible.mean()) ** 2)))
    return float(np.mean(errors))


def hybrid_loss(
    contrastive: Tensor | float, generative: Tensor | float, alpha: float
) -> Tensor | float:
    """``alpha * contrastive + (1 - alpha) * generative``.

    Raises:
        ConfigError: If ``alpha`` is outside ``[0, 1]``
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("hybrid_weight", f"{alpha} is outside [0, 1]")
    if isinstance(contrastive, Tensor) or isinstance(generative, Tensor):
        c = contrastive if isinstance(contrastive, Tensor) else Tensor(contrastive)
        g = generative if isinstance(generative, Tensor) else Tensor(generative)
        return ops.add(ops.scale(c, alpha), ops.scale(g, 1.0 - alpha))
    return alpha * float(contrastive) + (1.0 - alpha) * float(generative)


def stack_views(
    pairs: Sequence[tuple[Spectrogram, Spectrogram]], multiple: int = 1
) -> np.ndarray:
    """``(2B, F, M)``: all first views, then all second views.

    Views are filled with silence up to a frame count divisible by ``multiple``.
    """
    views = [a for a, _ in pairs] + [b for _, b in pairs]
    return np.stack([pad_to_multiple(v, multiple).values for v in views])
