"""Linear probes over frozen features."""

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from opera_forge.autodiff import ops
from opera_forge.autodiff.checkpoint import (
    decode_archive,
    encode_archive,
    pack_text,
    unpack_text,
)
from opera_forge.autodiff.losses import cross_entropy_logits, l2_penalty, mae_loss
from opera_forge.autodiff.optim import AdamState, adam_step, cosine_lr
from opera_forge.autodiff.tensor import Tensor, backward, no_grad
from opera_forge.bench.metrics import auroc, auroc_multiclass, mae, mape
from opera_forge.bench.tasks import TaskSpec
from opera_forge.core.exceptions import (
    ArchiveError,
    InvalidInputError,
    ShapeError,
    TrainingError,
)
from opera_forge.core.types import Metric, TaskKind
from opera_forge.models.layers import parameter, trunc_normal

logger = logging.getLogger(__name__)

_META_ENTRY = "__probe__.json"
_INIT, _ORDER = 0, 1


class ProbeConfig(BaseModel):
    """Optimizer settings for linear probes; the L2 weight comes from the task."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = Field(default=1e-3, gt=0.0)
    epochs: int = Field(default=64, ge=1)
    batch_size: int = Field(default=64, ge=1)
    schedule: Literal["constant", "cosine"] = "constant"


def _plain(value: Any) -> Any:
    return value.item() if isinstance(value, np.generic) else value


@dataclass(frozen=True, eq=False)
class ProbeModel:
    """A single fully connected layer on standardized features.

    Classification probes output ``K`` logits; regression probes output one
    value in standardized target units, mapped back by ``predict``.
    """

    kind: TaskKind
    weights: np.ndarray
    bias: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray
    classes: tuple[Any, ...] = ()
    target_mean: float = 0.0
    target_std: float = 1.0
    task_id: str = ""
    val_loss: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        arrays = (self.weights, self.bias, self.feature_mean, self.feature_std)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise TrainingError(f"probe for '{self.task_id}' has non-finite weights")

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    def _outputs(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float32)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ShapeError("probe", x.shape, self.weights.shape)
        return ((x - self.feature_mean) / self.feature_std) @ self.weights + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Class probabilities ``(n, K)`` or regression values ``(n,)``."""
        out = self._outputs(features).astype(np.float64)
        if self.kind == TaskKind.REGRESSION:
            return out[:, 0] * self.target_std + self.target_mean
        shifted = np.exp(out - out.max(axis=1, keepdims=True))
        return shifted / shifted.sum(axis=1, keepdims=True)

    def class_indices(self, labels: Sequence[Any] | np.ndarray) -> np.ndarray:
        """Position of each label in ``classes``.

        Raises:
            InvalidInputError: For a label the probe was not trained on
        """
        return _class_indices(labels, self.classes)

    def score(
        self,
        features: np.ndarray,
        labels: Sequence[Any] | np.ndarray,
        metric: Metric | None = None,
    ) -> float:
        """Evaluate on labelled features with ``metric`` (AUROC or MAE by kind)."""
        if metric is None:
            regression = self.kind == TaskKind.REGRESSION
            metric = Metric.MAE if regression else Metric.AUROC
        pred = self.predict(features)
        if metric == Metric.AUROC:
            y = self.class_indices(labels)
            if self.kind == TaskKind.BINARY:
                return auroc(pred[:, 1], y == 1)
            return auroc_multiclass(pred, y)
        y = np.asarray(labels, dtype=np.float64)
        return mae(pred, y) if metric == Metric.MAE else mape(pred, y)

    def to_bytes(self) -> bytes:
        meta = {
            "kind": str(self.kind),
            "classes": list(self.classes),
            "target_mean": self.target_mean,
            "target_std": self.target_std,
            "task_id": self.task_id,
        }
        return encode_archive(
            {
                _META_ENTRY: pack_text(json.dumps(meta, sort_keys=True)),
                "weights": self.weights,
                "bias": self.bias,
                "feature_mean": self.feature_mean,
                "feature_std": self.feature_std,
            }
        )

    @classmethod
    def from_bytes(cls, payload: bytes, origin: str = "<bytes>") -> "ProbeModel":
        tensors = decode_archive(payload, origin)
        try:
            meta = json.loads(unpack_text(tensors[_META_ENTRY]))
            return cls(
                kind=TaskKind(meta["kind"]),
                weights=tensors["weights"],
                bias=tensors["bias"],
                feature_mean=tensors["feature_mean"],
                feature_std=tensors["feature_std"],
                classes=tuple(meta["classes"]),
                target_mean=float(meta["target_mean"]),
                target_std=float(meta["target_std"]),
                task_id=meta["task_id"],
            )
        except (KeyError, ValueError) as e:
            raise ArchiveError(origin, f"not a probe archive: {e}") from e


def _class_indices(
    labels: Sequence[Any] | np.ndarray, classes: tuple[Any, ...]
) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([index[_plain(y)] for y in labels], dtype=np.intp)
    except KeyError as e:
        raise InvalidInputError("labels", f"unknown class {e.args[0]!r}") from None


def _standardizer(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    return mean.astype(np.float32), np.where(std > 0, std, 1.0).astype(np.float32)


def _classes(labels: np.ndarray, task: TaskSpec) -> tuple[Any, ...]:
    values, counts = np.unique(labels, return_counts=True)
    if values.size < 2:
        raise InvalidInputError(
            "labels", f"'{task.task_id}' training set has a single class"
        )
    if task.n_classes is not None and values.size > task.n_classes:
        raise InvalidInputError(
            "labels", f"{values.size} classes for a {task.n_classes}-class task"
        )
    for value, count in zip(values, counts, strict=True):
        if count < 2:
            logger.warning(
                "Class %r has %d training example in '%s'", value, count, task.task_id
            )
    return tuple(_plain(v) for v in values)


class _ProbeFit:
    """Tensors and loss for one probe training run."""

    def __init__(self, dim: int, outputs: int, task: TaskSpec, seed: int) -> None:
        rng = np.random.default_rng((seed, _INIT))
        self.task = task
        self.weight = parameter(trunc_normal(rng, (dim, outputs)))
        self.bias = parameter(np.zeros(outputs))

    @property
    def params(self) -> dict[str, Tensor]:
        return {"weight": self.weight, "bias": self.bias}

    def loss(self, x: np.ndarray, y: np.ndarray, penalize: bool = True) -> Tensor:
        out = ops.add(ops.matmul(Tensor.constant(x), self.weight), self.bias)
        if self.task.is_classification:
            loss = cross_entropy_logits(out, y)
        else:
            loss = mae_loss(out, y.reshape(-1, 1))
        if penalize and self.task.l2 > 0.0:
            loss = ops.add(loss, l2_penalty(self.weight, self.task.l2))
        return loss


def train_probe(
    features: np.ndarray,
    labels: Sequence[Any] | np.ndarray,
    task: TaskSpec,
    seed: int = 0,
    cfg: ProbeConfig | None = None,
    val: tuple[np.ndarray, Sequence[Any] | np.ndarray] | None = None,
) -> ProbeModel:
    """Fit a linear probe with Adam on cross-entropy or MAE plus L2 on weights.

    Features (and regression targets) are standardized with training
    statistics. With ``val`` the epoch with the lowest validation loss is
    kept; otherwise the last epoch.

    Raises:
        InvalidInputError: If classification labels hold a single class
        ShapeError: If features and labels disagree in length
        TrainingError: If the loss or a gradient is not finite
    """
    cfg = cfg or ProbeConfig()
    x = np.asarray(features, dtype=np.float32)
    raw = np.asarray(labels)
    if x.ndim != 2 or raw.shape != (x.shape[0],) or x.shape[0] == 0:
        raise ShapeError("train_probe", x.shape, raw.shape)
    feature_mean, feature_std = _standardizer(x)
    xs = (x - feature_mean) / feature_std

    classes: tuple[Any, ...] = ()
    target_mean, target_std = 0.0, 1.0
    if task.is_classification:
        classes = _classes(raw, task)
        y = _class_indices(raw, classes)
        outputs = len(classes)
    else:
        values = raw.astype(np.float64)
        target_mean = float(values.mean())
        target_std = float(values.std()) or 1.0
        y = ((values - target_mean) / target_std).astype(np.float32)
        outputs = 1

    def model(fit: _ProbeFit, val_loss: float | None = None) -> ProbeModel:
        return ProbeModel(
            kind=task.kind,
            weights=fit.weight.data.copy(),
            bias=fit.bias.data.copy(),
            feature_mean=feature_mean,
            feature_std=feature_std,
            classes=classes,
            target_mean=target_mean,
            target_std=target_std,
            task_id=task.task_id,
            val_loss=val_loss,
        )

    val_x: np.ndarray | None = None
    val_y: np.ndarray | None = None
    if val is not None and len(val[1]) > 0:
        val_x = (np.asarray(val[0], dtype=np.float32) - feature_mean) / feature_std
        if task.is_classification:
            known = np.array([_plain(v) in classes for v in val[1]], dtype=bool)
            if not known.all():
                logger.warning(
                    "Ignoring %d validation clips with unseen classes", (~known).sum()
                )
            val_x = val_x[known]
            val_y = _class_indices(np.asarray(val[1])[known], classes)
        else:
            val_y = (np.asarray(val[1], dtype=np.float64) - target_mean) / target_std
            val_y = val_y.astype(np.float32)

    fit = _ProbeFit(x.shape[1], outputs, task, seed)
    state = AdamState(lr=cfg.lr)
    n = x.shape[0]
    steps_per_epoch = -(-n // cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    best: ProbeModel | None = None
    best_loss = np.inf
    for epoch in range(cfg.epochs):
        order = np.random.default_rng((seed, _ORDER, epoch)).permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            loss = fit.loss(xs[rows], y[rows])
            if not np.isfinite(loss.item()):
                raise TrainingError("probe loss is not finite", epoch=epoch)
            for param in fit.params.values():
                param.grad = None
            backward(loss)
            grads = {k: p.grad for k, p in fit.params.items() if p.grad is not None}
            lr: float | None = None
            if cfg.schedule == "cosine":
                lr = cosine_lr(cfg.lr, state.t, total_steps)
            adam_step(fit.params, grads, state, lr)
        if val_x is not None and val_y is not None and len(val_y):
            with no_grad():
                val_loss = fit.loss(val_x, val_y, penalize=False).item()
            if val_loss < best_loss:
                best_loss = val_loss
                best = model(fit, val_loss)

    probe = best or model(fit)
    logger.debug(
        "Probe for %s: %d x %d, best val loss %s",
        task.task_id,
        probe.dim,
        outputs,
        probe.val_loss,
    )
    return probe
