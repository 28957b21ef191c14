"""Tiny ViT encoder over 4x4 spectrogram patches."""

import numpy as np

from opera_forge.autodiff import ops
from opera_forge.autodiff.tensor import Tensor
from opera_forge.core.exceptions import ConfigError, LengthError, ShapeError
from opera_forge.models.config import EncoderConfig
from opera_forge.models.layers import (
    LayerNorm,
    Linear,
    Module,
    TransformerBlock,
    parameter,
    trunc_normal,
)
from opera_forge.models.patching import PatchGrid, patchify


class ViTEncoder(Module):
    """Patch embedding, learned positions, pre-norm blocks, mean pooling."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator) -> None:
        self._cfg = cfg
        d = cfg.embed_dim
        self.patch_embed = Linear(cfg.patch_cells, d, rng)
        self.pos_embed = parameter(trunc_normal(rng, (cfg.max_positions, d)))
        self.blocks = [
            TransformerBlock(d, cfg.heads, cfg.mlp_ratio, rng) for _ in range(cfg.depth)
        ]
        self.norm = LayerNorm(d)

    @property
    def cfg(self) -> EncoderConfig:
        return self._cfg

    def pad_input(self, x: Tensor) -> Tensor:
        """Right-pad frames of ``(B, F, M)`` with zeros to a patch multiple.

        A bare tensor carries no silence floor. Spectrogram pipelines pad with
        ``pad_to_multiple`` first, so this only fills ad hoc inputs.
        """
        extra = -x.shape[1] % self._cfg.patch_size
        if not extra:
            return x
        fill = np.full((x.shape[0], extra, x.shape[2]), 0.0, dtype=x.data.dtype)
        return ops.concat([x, Tensor.constant(fill)], axis=1)

    def patch_embed_tokens(self, x: Tensor) -> tuple[Tensor, PatchGrid]:
        """Embedded tokens ``(B, n, d)`` with positions added, plus the grid.

        Raises:
            ShapeError: If the mel axis does not match the configuration
            LengthError: If there are fewer frames than ``min_frames``
            ConfigError: If the token count exceeds ``max_positions``
        """
        cfg = self._cfg
        if x.ndim != 3 or x.shape[2] != cfg.n_mels:
            raise ShapeError("vit input", x.shape, (-1, -1, cfg.n_mels))
        if x.shape[1] < cfg.min_frames:
            raise LengthError(x.shape[1], cfg.min_frames)
        x = self.pad_input(x)
        grid = PatchGrid.for_shape(x.shape[1], x.shape[2], cfg.patch_size)
        if grid.n_tokens > cfg.max_positions:
            raise ConfigError(
                "max_positions",
                f"{grid.n_tokens} tokens exceed {cfg.max_positions} positions",
            )
        tokens = self.patch_embed(patchify(x, cfg.patch_size))
        pos = ops.index_select(self.pos_embed, np.arange(grid.n_tokens), axis=0)
        return ops.add(tokens, pos), grid

    def forward_tokens(
        self, x: Tensor, visible: np.ndarray | None = None
    ) -> tuple[Tensor, PatchGrid]:
        """Encode ``(B, F, M)``; ``visible`` ``(B, k)`` keeps only those tokens."""
        tokens, grid = self.patch_embed_tokens(x)
        if visible is not None:
            index = np.broadcast_to(
                visible[:, :, None], (*visible.shape, tokens.shape[2])
            )
            tokens = ops.gather(tokens, index, axis=1)
        for block in self.blocks:
            tokens = block(tokens)
        return self.norm(tokens), grid

    def forward(self, x: Tensor) -> Tensor:
        """Mean-pooled embedding ``(B, d)``."""
        tokens, _ = self.forward_tokens(x)
        return ops.reduce_mean(tokens, axis=1)
