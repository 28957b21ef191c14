"""Self-supervised pretraining: objectives and the training loop."""

from opera_forge.ssl.config import DEFAULT_CROP_FRAMES, PretrainConfig
from opera_forge.ssl.history import EpochRecord, TrainHistory
from opera_forge.ssl.objectives import (
    contrastive_loss,
    generative_step,
    hybrid_loss,
    make_views,
)
from opera_forge.ssl.trainer import Pretrainer, PretrainModel, pretrain

__all__ = [
    "DEFAULT_CROP_FRAMES",
    "EpochRecord",
    "PretrainConfig",
    "PretrainModel",
    "Pretrainer",
    "TrainHistory",
    "contrastive_loss",
    "generative_step",
    "hybrid_loss",
    "make_views",
    "pretrain",
]
