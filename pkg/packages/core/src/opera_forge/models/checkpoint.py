"""Encoder checkpoints: weights plus the config that built them."""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from opera_forge.autodiff.checkpoint import (
    load_archive,
    pack_text,
    save_archive,
    unpack_text,
)
from opera_forge.core.exceptions import ArchiveError
from opera_forge.core.types import EncoderKind
from opera_forge.models.cnn import CnnEncoder
from opera_forge.models.config import EncoderConfig
from opera_forge.models.layers import Module
from opera_forge.models.vit import ViTEncoder

logger = logging.getLogger(__name__)

CONFIG_ENTRY = "__config__.json"
ENCODER_PREFIX = "encoder."

Encoder = ViTEncoder | CnnEncoder


def build_encoder(cfg: EncoderConfig, rng: np.random.Generator) -> Encoder:
    if cfg.kind == EncoderKind.CNN:
        return CnnEncoder(cfg, rng)
    return ViTEncoder(cfg, rng)


@dataclass
class EncoderCheckpoint:
    """Named weights keyed ``<part>.<parameter>`` and the encoder config.

    Parts are ``encoder``, and when pretraining produced them, ``projector``,
    ``head`` and ``decoder``.
    """

    config: EncoderConfig
    weights: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_modules(
        cls, config: EncoderConfig, **parts: Module | None
    ) -> "EncoderCheckpoint":
        weights: dict[str, np.ndarray] = {}
        for part, module in parts.items():
            if module is None:
                continue
            for name, value in module.state_dict().items():
                weights[f"{part}.{name}"] = value
        return cls(config=config, weights=weights)

    def part(self, prefix: str) -> dict[str, np.ndarray]:
        """Weights of one part with the ``<part>.`` prefix stripped."""
        head = f"{prefix}."
        return {
            k[len(head) :]: v for k, v in self.weights.items() if k.startswith(head)
        }

    def has_part(self, prefix: str) -> bool:
        return any(k.startswith(f"{prefix}.") for k in self.weights)

    def build_encoder(self, seed: int = 0) -> Encoder:
        """Fresh encoder with the stored ``encoder.*`` weights loaded."""
        encoder = build_encoder(self.config, np.random.default_rng(seed))
        encoder.load_state_dict(self.part("encoder"))
        return encoder

    def save(self, path: Path) -> None:
        tensors = {CONFIG_ENTRY: pack_text(self.config.model_dump_json())}
        tensors.update(self.weights)
        save_archive(path, tensors)
        logger.info("Saved checkpoint with %d tensors to %s", len(self.weights), path)

    @classmethod
    def load(cls, path: Path) -> "EncoderCheckpoint":
        """Read an ``OPCK`` checkpoint.

        Raises:
            ArchiveError: If the config entry is missing or invalid
        """
        tensors = load_archive(path)
        raw = tensors.pop(CONFIG_ENTRY, None)
        if raw is None:
            raise ArchiveError(str(path), f"missing '{CONFIG_ENTRY}' entry")
        try:
            config = EncoderConfig.model_validate_json(unpack_text(raw))
        except (ValidationError, UnicodeDecodeError) as e:
            raise ArchiveError(str(path), f"invalid encoder config: {e}") from e
        logger.debug("Loaded checkpoint %s (%s encoder)", path, config.kind)
        return cls(config=config, weights=tensors)
