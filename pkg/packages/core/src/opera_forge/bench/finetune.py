"""Joint training of encoder and a linear head, with optional frozen parts."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from opera_forge.autodiff import ops
from opera_forge.autodiff.losses import cross_entropy_logits, l2_penalty, mae_loss
from opera_forge.autodiff.optim import AdamState, adam_step
from opera_forge.autodiff.tensor import Tensor, backward, no_grad
from opera_forge.bench.metrics import auroc, auroc_multiclass, mae, mape
from opera_forge.bench.tasks import TaskSpec
from opera_forge.core.exceptions import (
    ConfigError,
    InvalidInputError,
    ShapeError,
    TrainingError,
)
from opera_forge.core.types import Metric, PadPolicy, TaskKind
from opera_forge.dsp.framing import pad, pad_to_multiple
from opera_forge.dsp.spectrogram import Spectrogram
from opera_forge.models.checkpoint import Encoder, build_encoder
from opera_forge.models.layers import Linear, Module

logger = logging.getLogger(__name__)

_INIT, _ORDER = 0, 1


class FinetuneConfig(BaseModel):
    """Fine-tuning settings.

    ``frozen`` lists parameter-name prefixes kept fixed, e.g. ``encoder``
    for the whole encoder or ``encoder.conv1`` for the first CNN block.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = Field(default=1e-4, gt=0.0)
    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=16, ge=1)
    frozen: tuple[str, ...] = ()
    input_frames: int | None = Field(
        default=None, ge=1, description="Clip length fed to the encoder"
    )
    seed: int = 0


class FinetuneModel(Module):
    def __init__(self, encoder: Encoder, head: Linear) -> None:
        self.encoder = encoder
        self.head = head

    def forward(self, x: Tensor) -> Tensor:
        return self.head(self.encoder(x))


def is_frozen(name: str, frozen: Sequence[str]) -> bool:
    return any(name == p or name.startswith(f"{p}.") for p in frozen)


@dataclass
class FinetuneResult:
    """Updated copies of the encoder and head plus how to read their outputs."""

    model: FinetuneModel
    kind: TaskKind
    input_frames: int
    pad_policy: PadPolicy
    classes: tuple[Any, ...] = ()
    target_mean: float = 0.0
    target_std: float = 1.0
    trainable: tuple[str, ...] = ()
    losses: list[float] = field(default_factory=list)

    @property
    def encoder(self) -> Encoder:
        return self.model.encoder

    @property
    def head(self) -> Linear:
        return self.model.head

    def predict(self, clips: Sequence[Spectrogram]) -> np.ndarray:
        """Class probabilities ``(n, K)`` or regression values ``(n,)``."""
        multiple = self.encoder.cfg.frame_multiple
        x = Tensor.constant(
            _inputs(clips, self.input_frames, self.pad_policy, multiple)
        )
        with no_grad():
            out = self.model(x).data.astype(np.float64)
        if self.kind == TaskKind.REGRESSION:
            return out[:, 0] * self.target_std + self.target_mean
        shifted = np.exp(out - out.max(axis=1, keepdims=True))
        return shifted / shifted.sum(axis=1, keepdims=True)

    def score(
        self,
        clips: Sequence[Spectrogram],
        labels: Sequence[Any] | np.ndarray,
        metric: Metric,
    ) -> float:
        pred = self.predict(clips)
        if metric == Metric.AUROC:
            index = {c: i for i, c in enumerate(self.classes)}
            y = np.array([index[_plain(v)] for v in labels], dtype=np.intp)
            if self.kind == TaskKind.BINARY:
                return auroc(pred[:, 1], y == 1)
            return auroc_multiclass(pred, y)
        targets = np.asarray(labels, dtype=np.float64)
        return mae(pred, targets) if metric == Metric.MAE else mape(pred, targets)


def _plain(value: Any) -> Any:
    return value.item() if isinstance(value, np.generic) else value


def _inputs(
    clips: Sequence[Spectrogram], frames: int, policy: PadPolicy, multiple: int = 1
) -> np.ndarray:
    """Pad every clip per ``policy`` and keep its first ``frames`` frames.

    The window is then filled with silence up to a multiple of ``multiple``.
    """
    rows = []
    for clip in clips:
        padded = pad(clip, frames, policy)
        window = padded.with_values(padded.values[:frames])
        rows.append(pad_to_multiple(window, multiple).values)
    return np.stack(rows)


def _copy_encoder(encoder: Encoder, seed: int) -> Encoder:
    copy = build_encoder(encoder.cfg, np.random.default_rng((seed, _INIT)))
    copy.load_state_dict(encoder.state_dict())
    return copy


def finetune(
    encoder: Encoder,
    head: Linear | None,
    clips: Sequence[Spectrogram],
    labels: Sequence[Any] | np.ndarray,
    task: TaskSpec,
    cfg: FinetuneConfig | None = None,
) -> FinetuneResult:
    """Train copies of ``encoder`` and ``head`` jointly; inputs are left untouched.

    A missing ``head`` starts as a fresh linear layer. Parameters matching a
    ``cfg.frozen`` prefix keep their values.

    Raises:
        ConfigError: If every parameter is frozen
        InvalidInputError: If classification labels hold a single class
        ShapeError: If the head does not fit the encoder or the label space
        TrainingError: If the loss or a gradient is not finite
    """
    cfg = cfg or FinetuneConfig()
    raw = np.asarray(labels)
    if raw.shape != (len(clips),) or not clips:
        raise ShapeError("finetune", (len(clips),), raw.shape)

    classes: tuple[Any, ...] = ()
    target_mean, target_std = 0.0, 1.0
    if task.is_classification:
        classes = tuple(_plain(v) for v in np.unique(raw))
        if len(classes) < 2:
            raise InvalidInputError("labels", "fine-tuning needs two classes")
        index = {c: i for i, c in enumerate(classes)}
        y = np.array([index[_plain(v)] for v in raw], dtype=np.intp)
        outputs = len(classes)
    else:
        values = raw.astype(np.float64)
        target_mean = float(values.mean())
        target_std = float(values.std()) or 1.0
        y = ((values - target_mean) / target_std).astype(np.float32)
        outputs = 1

    dim = encoder.cfg.embed_dim
    rng = np.random.default_rng((cfg.seed, _INIT))
    new_head = Linear(dim, outputs, rng)
    if head is not None:
        if head.weight.shape != (dim, outputs):
            raise ShapeError("finetune head", (dim, outputs), head.weight.shape)
        new_head.load_state_dict(head.state_dict())
    model = FinetuneModel(_copy_encoder(encoder, cfg.seed), new_head)

    params = {
        name: p
        for name, p in model.named_parameters().items()
        if not is_frozen(name, cfg.frozen)
    }
    if not params:
        raise ConfigError("finetune.frozen", f"{list(cfg.frozen)} freezes everything")
    logger.info(
        "Fine-tuning %d of %d parameter tensors on %s",
        len(params),
        len(model.named_parameters()),
        task.task_id,
    )

    frames = cfg.input_frames or encoder.cfg.max_input_frames
    x = _inputs(clips, frames, task.pad_policy, encoder.cfg.frame_multiple)
    result = FinetuneResult(
        model=model,
        kind=task.kind,
        input_frames=frames,
        pad_policy=task.pad_policy,
        classes=classes,
        target_mean=target_mean,
        target_std=target_std,
        trainable=tuple(params),
    )
    state = AdamState(lr=cfg.lr)
    for epoch in range(cfg.epochs):
        order = np.random.default_rng((cfg.seed, _ORDER, epoch)).permutation(len(x))
        losses = []
        for batch, start in enumerate(range(0, len(x), cfg.batch_size)):
            rows = order[start : start + cfg.batch_size]
            out = model(Tensor.constant(x[rows]))
            if task.is_classification:
                loss = cross_entropy_logits(out, y[rows])
            else:
                loss = mae_loss(out, y[rows].reshape(-1, 1))
            if task.l2 > 0.0 and "head.weight" in params:
                loss = ops.add(loss, l2_penalty(model.head.weight, task.l2))
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError("loss is not finite", epoch=epoch, batch=batch)
            for param in model.named_parameters().values():
                param.grad = None
            backward(loss)
            grads = {n: p.grad for n, p in params.items() if p.grad is not None}
            adam_step(params, grads, state)
            losses.append(value)
        result.losses.append(float(np.mean(losses)))
        logger.debug("finetune epoch %d: loss %.4f", epoch, result.losses[-1])
    return result
