"""The pretraining loop with validation-based checkpoint selection."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from opera_forge.autodiff import ops
from opera_forge.autodiff.optim import AdamState, adam_step
from opera_forge.autodiff.tensor import Tensor, backward, no_grad
from opera_forge.core.exceptions import ConfigError, InvalidInputError, TrainingError
from opera_forge.core.types import EncoderKind, PretrainMethod
from opera_forge.data.batching import PretrainBatch
from opera_forge.models.checkpoint import Encoder, EncoderCheckpoint, build_encoder
from opera_forge.models.config import EncoderConfig
from opera_forge.models.decoder import MaskedDecoder
from opera_forge.models.heads import BilinearHead, Projector
from opera_forge.models.layers import Module
from opera_forge.models.vit import ViTEncoder
from opera_forge.ssl.config import PretrainConfig
from opera_forge.ssl.history import EpochRecord, TrainHistory
from opera_forge.ssl.objectives import (
    contrastive_loss,
    hybrid_loss,
    mask_batch,
    masked_reconstruction_loss,
    mean_predictor_baseline,
)

logger = logging.getLogger(__name__)

# Stream tags for per-batch generators: (seed, tag, ...).
_EPOCH_ORDER, _TRAIN_BATCH, _VAL_BATCH = 0, 1, 2


class PretrainModel(Module):
    """Encoder plus whichever heads the objective needs.

    Parameter names are prefixed ``encoder.``, ``projector.``, ``head.`` and
    ``decoder.``, the same prefixes checkpoints use.
    """

    def __init__(
        self,
        encoder_cfg: EncoderConfig,
        method: PretrainMethod,
        rng: np.random.Generator,
    ) -> None:
        self.encoder: Encoder = build_encoder(encoder_cfg, rng)
        self.projector: Projector | None = None
        self.head: BilinearHead | None = None
        self.decoder: MaskedDecoder | None = None
        if method != PretrainMethod.GENERATIVE:
            self.projector = Projector(
                encoder_cfg.embed_dim, encoder_cfg.projector_dim, rng
            )
            self.head = BilinearHead(encoder_cfg.projector_dim, rng)
        if method != PretrainMethod.CONTRASTIVE:
            self.decoder = MaskedDecoder(encoder_cfg, rng)


@dataclass(frozen=True)
class BatchResult:
    loss: Tensor
    top1: float | None = None
    baseline: float | None = None


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_batches(
    batches: Sequence[PretrainBatch], val_fraction: float, seed: int
) -> tuple[list[PretrainBatch], list[PretrainBatch]]:
    """Shuffle and hold out ``round(val_fraction * n)`` batches for validation.

    At least one batch always stays in training.
    """
    n = len(batches)
    order = np.random.default_rng(seed).permutation(n)
    n_val = min(_round_half_up(val_fraction * n), n - 1)
    val = [batches[i] for i in order[:n_val]]
    train = [batches[i] for i in order[n_val:]]
    return train, val


class Pretrainer:
    """Runs one objective over homogeneous batches and keeps the best weights."""

    def __init__(self, cfg: PretrainConfig, encoder_cfg: EncoderConfig) -> None:
        if encoder_cfg.kind == EncoderKind.CNN and cfg.method != (
            PretrainMethod.CONTRASTIVE
        ):
            raise ConfigError(
                "pretrain.method",
                f"{cfg.method} pretraining needs the vit encoder (masked patches)",
            )
        self.cfg = cfg
        self.encoder_cfg = encoder_cfg
        self.model = PretrainModel(
            encoder_cfg, cfg.method, np.random.default_rng(cfg.seed)
        )
        self.params = self.model.named_parameters()
        self.state = AdamState(lr=cfg.lr)

    def check_batches(self, batches: Sequence[PretrainBatch]) -> None:
        """Raises ConfigError if a batch is too small or crops too short."""
        minimum = self.encoder_cfg.min_frames
        for batch in batches:
            if batch.crop_frames < minimum:
                raise ConfigError(
                    "crop_frames",
                    f"{batch.source}/{batch.modality} crops {batch.crop_frames} "
                    f"frames, encoder needs {minimum}",
                )
            if self.cfg.method != PretrainMethod.GENERATIVE and len(batch) < 2:
                raise ConfigError("batch_size", "contrastive batches need >= 2 clips")

    def _contrastive(
        self, batch: PretrainBatch, rng: np.random.Generator
    ) -> BatchResult:
        model = self.model
        assert model.projector is not None and model.head is not None
        multiple = self.encoder_cfg.frame_multiple
        view_a, view_b = batch.crops(rng, multiple), batch.crops(rng, multiple)
        b = len(batch)
        both = Tensor.constant(np.concatenate([view_a, view_b]))
        z = model.projector(model.encoder(both))
        za = ops.index_select(z, np.arange(b), axis=0)
        zb = ops.index_select(z, np.arange(b, 2 * b), axis=0)
        loss, top1 = contrastive_loss(za, zb, model.head, self.cfg.symmetric)
        return BatchResult(loss=loss, top1=top1)

    def _generative(
        self, values: np.ndarray, rng: np.random.Generator
    ) -> BatchResult:
        model = self.model
        assert model.decoder is not None and isinstance(model.encoder, ViTEncoder)
        patch = self.encoder_cfg.patch_size
        masked = mask_batch(values, self.cfg.mask_ratio, rng, patch)
        loss = masked_reconstruction_loss(masked, model.encoder, model.decoder)
        return BatchResult(loss=loss, baseline=mean_predictor_baseline(masked))

    def batch_loss(
        self, batch: PretrainBatch, rng: np.random.Generator
    ) -> BatchResult:
        method = self.cfg.method
        patch = self.encoder_cfg.patch_size
        if method == PretrainMethod.CONTRASTIVE:
            return self._contrastive(batch, rng)
        if method == PretrainMethod.GENERATIVE:
            return self._generative(batch.crops(rng, patch), rng)
        contrastive = self._contrastive(batch, rng)
        generative = self._generative(batch.crops(rng, patch), rng)
        loss = hybrid_loss(contrastive.loss, generative.loss, self.cfg.hybrid_weight)
        assert isinstance(loss, Tensor)
        return BatchResult(
            loss=loss, top1=contrastive.top1, baseline=generative.baseline
        )

    def train_step(
        self, batch: PretrainBatch, rng: np.random.Generator, epoch: int, index: int
    ) -> float:
        """One Adam update; returns the batch loss.

        Raises:
            TrainingError: If the loss or a gradient is not finite
        """
        result = self.batch_loss(batch, rng)
        value = result.loss.item()
        if not math.isfinite(value):
            raise TrainingError("loss is not finite", epoch=epoch, batch=index)
        for param in self.params.values():
            param.grad = None
        backward(result.loss)
        grads = {n: p.grad for n, p in self.params.items() if p.grad is not None}
        try:
            adam_step(self.params, grads, self.state)
        except TrainingError as e:
            raise TrainingError(
                e.reason, parameter=e.parameter, epoch=epoch, batch=index
            ) from e
        return value

    def evaluate(
        self, batches: Sequence[PretrainBatch]
    ) -> tuple[float, float | None, float | None]:
        """Mean loss, top-1 and baseline over ``batches`` with fixed crops and masks."""
        losses, top1s, baselines = [], [], []
        with no_grad():
            for j, batch in enumerate(batches):
                rng = np.random.default_rng((self.cfg.seed, _VAL_BATCH, j))
                result = self.batch_loss(batch, rng)
                losses.append(result.loss.item())
                if result.top1 is not None:
                    top1s.append(result.top1)
                if result.baseline is not None:
                    baselines.append(result.baseline)
        top1 = float(np.mean(top1s)) if top1s else None
        baseline = float(np.mean(baselines)) if baselines else None
        return float(np.mean(losses)), top1, baseline

    def fit(
        self, batches: Sequence[PretrainBatch]
    ) -> tuple[EncoderCheckpoint, TrainHistory]:
        """Train for ``cfg.epochs`` and return the best-validation weights.

        Raises:
            InvalidInputError: If ``batches`` is empty
            TrainingError: On a non-finite loss or gradient, with epoch/batch
        """
        if not batches:
            raise InvalidInputError("batches", "no pretraining batches")
        self.check_batches(batches)
        cfg = self.cfg
        train, val = split_batches(batches, cfg.val_fraction, cfg.seed)
        if not val:
            logger.warning("Only one batch: selecting on training loss")
        logger.info(
            "Pretraining %s: %d train / %d val batches, %d epochs",
            cfg.method,
            len(train),
            len(val),
            cfg.epochs,
        )

        history = TrainHistory()
        best_loss = math.inf
        best_state = self.model.state_dict()
        for epoch in range(cfg.epochs):
            epoch_rng = np.random.default_rng((cfg.seed, _EPOCH_ORDER, epoch))
            order = epoch_rng.permutation(len(train))
            losses = []
            for index in order:
                stream = (cfg.seed, _TRAIN_BATCH, epoch, int(index))
                rng = np.random.default_rng(stream)
                losses.append(self.train_step(train[index], rng, epoch, int(index)))
                history.updates += 1
            train_loss = float(np.mean(losses))
            if val:
                val_loss, top1, baseline = self.evaluate(val)
            else:
                val_loss, top1, baseline = train_loss, None, None
            history.records.append(
                EpochRecord(
                    epoch=epoch,
                    train_loss=train_loss,
                    val_loss=val_loss,
                    top1=top1,
                    val_baseline=baseline,
                )
            )
            if val_loss < best_loss:
                best_loss = val_loss
                best_state = self.model.state_dict()
            logger.info(
                "epoch %d: train %.4f, val %.4f%s",
                epoch,
                train_loss,
                val_loss,
                f", top1 {top1:.3f}" if top1 is not None else "",
            )

        checkpoint = EncoderCheckpoint(config=self.encoder_cfg, weights=best_state)
        return checkpoint, history


def pretrain(
    batches: Sequence[PretrainBatch],
    cfg: PretrainConfig,
    encoder_cfg: EncoderConfig | None = None,
) -> tuple[EncoderCheckpoint, TrainHistory]:
    """Pretrain an encoder with ``cfg.method`` and keep the best-validation epoch."""
    return Pretrainer(cfg, encoder_cfg or EncoderConfig()).fit(batches)
