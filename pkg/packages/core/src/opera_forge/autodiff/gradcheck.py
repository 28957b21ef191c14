"""Finite-difference gradient verification in float64."""

from collections.abc import Callable, Sequence

import numpy as np

from opera_forge.autodiff.tensor import Tensor, backward, no_grad, precision


def numeric_gradient(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    index: int,
    eps: float,
) -> np.ndarray:
    """Fourth-order central difference of ``fn`` w.r.t. ``inputs[index]``."""
    base = [np.array(x, dtype=np.float64) for x in inputs]
    target = base[index]
    grad = np.zeros_like(target)

    def value() -> float:
        with no_grad():
            return float(fn(*(Tensor(x) for x in base)).data)

    for pos in np.ndindex(target.shape):
        original = target[pos]
        samples = []
        for step in (2.0, 1.0, -1.0, -2.0):
            target[pos] = original + step * eps
            samples.append(value())
        target[pos] = original
        f2, f1, fm1, fm2 = samples
        grad[pos] = (-f2 + 8.0 * f1 - 8.0 * fm1 + fm2) / (12.0 * eps)
    return grad


def grad_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    eps: float = 1e-3,
) -> float:
    """Largest relative disagreement between backward and finite differences.

    Each coordinate contributes ``|a - n| / max(|a|, |n|, 1e-12)``. ``fn`` must
    return a scalar tensor; it is evaluated in float64.
    """
    with precision(np.float64):
        tensors = [
            Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)
            for x in inputs
        ]
        backward(fn(*tensors))
        worst = 0.0
        for i, t in enumerate(tensors):
            analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
            numeric = numeric_gradient(fn, inputs, i, eps)
            denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
            worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    return worst
