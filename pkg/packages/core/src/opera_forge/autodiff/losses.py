"""Training losses."""

import numpy as np

from opera_forge.autodiff import ops
from opera_forge.autodiff.tensor import Function, Tensor
from opera_forge.core.exceptions import ContractError, ShapeError, TargetIndexError


class _CrossEntropy(Function):
    """Mean softmax cross-entropy with a max-shift, fused for stability."""

    def forward(
        self, logits: np.ndarray, targets: np.ndarray | None = None
    ) -> np.ndarray:
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        denom = exp.sum(axis=1, keepdims=True)
        self.probs = exp / denom
        self.targets = targets
        rows = np.arange(logits.shape[0])
        losses = np.log(denom[:, 0]) - shifted[rows, targets]
        return np.asarray(losses.mean(), dtype=logits.dtype)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        batch = self.probs.shape[0]
        g = self.probs.copy()
        g[np.arange(batch), self.targets] -= 1.0
        return ((g * (grad / batch)).astype(grad.dtype),)


def cross_entropy_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean over the batch of ``-log softmax(logits)[target]``.

    Args:
        logits: ``(B, K)`` scores, ``K >= 2``
        targets: ``(B,)`` integer class indices

    Raises:
        ShapeError: If shapes disagree or ``K < 2``
        TargetIndexError: If a target is outside ``[0, K)``
    """
    targets = np.asarray(targets, dtype=np.intp)
    if logits.ndim != 2 or logits.shape[1] < 2 or targets.shape != logits.shape[:1]:
        raise ShapeError("cross_entropy", logits.shape, targets.shape)
    n_classes = logits.shape[1]
    bad = targets[(targets < 0) | (targets >= n_classes)]
    if bad.size:
        raise TargetIndexError(int(bad[0]), n_classes)
    return _CrossEntropy.apply(logits, targets=targets)


def masked_mse(pred: Tensor, target: np.ndarray, mask: np.ndarray) -> Tensor:
    """Squared error averaged over the masked rows only.

    With a 1-D ``mask`` the rows are entries of axis 0 of ``pred``; with a
    2-D ``(B, m)`` mask each batch item selects its own ``m`` rows of axis 1,
    and the result is the mean of the per-item losses. Either way the sum is
    divided by the number of masked cells.

    Raises:
        ContractError: If the mask is empty or holds invalid indices
        ShapeError: If ``pred`` and ``target`` differ in shape
    """
    target = np.asarray(target, dtype=pred.data.dtype)
    if target.shape != pred.shape:
        raise ShapeError("masked_mse", pred.shape, target.shape)
    mask = np.asarray(mask, dtype=np.intp)
    if mask.size == 0:
        raise ContractError("masked_mse", "mask is empty")

    if mask.ndim == 1:
        axis, n_rows = 0, pred.shape[0]
        if np.unique(mask).size != mask.size:
            raise ContractError("masked_mse", "mask indices must be unique")
        picked = ops.index_select(pred, mask, axis=0)
        picked_target = np.take(target, mask, axis=0)
    elif mask.ndim == 2 and pred.ndim >= 2 and mask.shape[0] == pred.shape[0]:
        axis, n_rows = 1, pred.shape[1]
        index = mask.reshape(mask.shape + (1,) * (pred.ndim - 2))
        index = np.broadcast_to(index, mask.shape + pred.shape[2:])
        picked = ops.gather(pred, index, axis=1)
        picked_target = np.take_along_axis(target, index, axis=1)
    else:
        raise ShapeError("masked_mse", pred.shape, mask.shape)
    if mask.min() < 0 or mask.max() >= n_rows:
        raise ContractError("masked_mse", f"mask index out of range for axis {axis}")

    diff = ops.sub(picked, Tensor.constant(picked_target))
    return ops.reduce_mean(ops.mul(diff, diff))


def mae_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean absolute error."""
    target = np.asarray(target, dtype=pred.data.dtype)
    if target.shape != pred.shape:
        raise ShapeError("mae_loss", pred.shape, target.shape)
    return ops.reduce_mean(ops.absolute(ops.sub(pred, Tensor.constant(target))))


def l2_penalty(weights: Tensor, coefficient: float) -> Tensor:
    return ops.scale(ops.reduce_sum(ops.mul(weights, weights)), coefficient)
