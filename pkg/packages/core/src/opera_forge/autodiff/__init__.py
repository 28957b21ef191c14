"""Reverse-mode automatic differentiation over numpy arrays, plus Adam."""

from opera_forge.autodiff.checkpoint import load_archive, save_archive
from opera_forge.autodiff.gradcheck import grad_check
from opera_forge.autodiff.losses import cross_entropy_logits, mae_loss, masked_mse
from opera_forge.autodiff.optim import AdamState, adam_step
from opera_forge.autodiff.tensor import (
    Function,
    Tape,
    Tensor,
    backward,
    no_grad,
    precision,
)

__all__ = [
    "AdamState",
    "Function",
    "Tape",
    "Tensor",
    "adam_step",
    "backward",
    "cross_entropy_logits",
    "grad_check",
    "load_archive",
    "mae_loss",
    "masked_mse",
    "no_grad",
    "precision",
    "save_archive",
]
