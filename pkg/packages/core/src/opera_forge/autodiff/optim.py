"""Adam optimizer over named parameters."""

import logging
from dataclasses import dataclass, field

import numpy as np

from opera_forge.autodiff.tensor import Tensor
from opera_forge.core.exceptions import ShapeError, TrainingError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moment buffers and step count, keyed by parameter name."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float | None = None,
) -> AdamState:
    """Apply one bias-corrected Adam update in place.

    Parameters without a gradient are skipped. ``lr`` overrides
    ``state.lr`` for this step (learning-rate schedules).

    Raises:
        TrainingError: If a gradient contains NaN or inf, naming the parameter
        ShapeError: If a gradient does not match its parameter
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise TrainingError("non-finite gradient", parameter=name)
        if grad.shape != params[name].shape:
            raise ShapeError(f"adam_step[{name}]", params[name].shape, grad.shape)

    state.t += 1
    step_lr = state.lr if lr is None else lr
    bias1 = 1.0 - state.beta1**state.t
    bias2 = 1.0 - state.beta2**state.t

    for name, grad in grads.items():
        param = params[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None or v is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[name], state.v[name] = m, v
        update = step_lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        param.data = (param.data - update).astype(param.data.dtype)
    return state


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """Cosine decay from ``base_lr`` to zero over ``total_steps``."""
    if total_steps <= 1:
        return base_lr
    progress = min(step, total_steps - 1) / (total_steps - 1)
    return 0.5 * base_lr * (1.0 + float(np.cos(np.pi * progress)))
