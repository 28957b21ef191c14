"""Encoders, pretraining heads, masking and saliency."""

from opera_forge.models.checkpoint import EncoderCheckpoint, build_encoder
from opera_forge.models.cnn import CnnEncoder
from opera_forge.models.config import EncoderConfig
from opera_forge.models.decoder import MaskedDecoder, reconstruct
from opera_forge.models.heads import BilinearHead, Projector, bilinear_similarity
from opera_forge.models.patching import MaskPlan, PatchGrid, patchify, sample_mask
from opera_forge.models.saliency import saliency
from opera_forge.models.vit import ViTEncoder

__all__ = [
    "BilinearHead",
    "CnnEncoder",
    "EncoderCheckpoint",
    "EncoderConfig",
    "MaskPlan",
    "MaskedDecoder",
    "PatchGrid",
    "Projector",
    "ViTEncoder",
    "bilinear_similarity",
    "build_encoder",
    "patchify",
    "reconstruct",
    "sample_mask",
    "saliency",
]
