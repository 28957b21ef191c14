"""Masked-patch reconstruction: decoder and the encode-visible/decode-all pass."""

from collections.abc import Sequence

import numpy as np

from opera_forge.autodiff import ops
from opera_forge.autodiff.tensor import Tensor
from opera_forge.core.exceptions import ContractError
from opera_forge.models.config import EncoderConfig
from opera_forge.models.layers import (
    LayerNorm,
    Linear,
    Module,
    TransformerBlock,
    parameter,
    trunc_normal,
)
from opera_forge.models.patching import MaskPlan, PatchGrid
from opera_forge.models.vit import ViTEncoder


class MaskedDecoder(Module):
    """Plain transformer with global attention over the full token grid."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator) -> None:
        dd = cfg.decoder_dim
        self.embed = Linear(cfg.embed_dim, dd, rng)
        self.mask_token = parameter(trunc_normal(rng, (1, 1, dd)))
        self.pos_embed = parameter(trunc_normal(rng, (cfg.max_positions, dd)))
        self.blocks = [
            TransformerBlock(dd, cfg.decoder_heads, cfg.mlp_ratio, rng)
            for _ in range(cfg.decoder_depth)
        ]
        self.norm = LayerNorm(dd)
        self.pred = Linear(dd, cfg.patch_cells, rng)

    def forward(self, visible: Tensor, restore: np.ndarray) -> Tensor:
        """Predict every patch of the grid.

        Args:
            visible: Encoder output for the visible tokens, ``(B, k, d)``
            restore: ``(B, n)`` positions putting ``visible + masked`` back
                into grid order

        Returns:
            ``(B, n, patch_cells)`` predicted cell values
        """
        b, k, _ = visible.shape
        n = restore.shape[1]
        x = self.embed(visible)
        dd = x.shape[2]
        fill = Tensor.constant(np.zeros((b, n - k, dd), dtype=x.data.dtype))
        x = ops.concat([x, ops.add(fill, self.mask_token)], axis=1)
        index = np.broadcast_to(restore[:, :, None], (b, n, dd))
        x = ops.gather(x, index, axis=1)
        x = ops.add(x, ops.index_select(self.pos_embed, np.arange(n), axis=0))
        for block in self.blocks:
            x = block(x)
        return self.pred(self.norm(x))


def reconstruct(
    spec_batch: Tensor,
    plans: Sequence[MaskPlan],
    encoder: ViTEncoder,
    decoder: MaskedDecoder,
) -> tuple[Tensor, PatchGrid]:
    """Encode the visible tokens of each item and predict all patches.

    Every plan must mask the same number of tokens so the batch stays
    rectangular.

    Raises:
        ContractError: If a plan does not match the grid of ``spec_batch``,
            plans disagree on the masked count, or no token is left visible
    """
    if len(plans) != spec_batch.shape[0]:
        raise ContractError(
            "reconstruct", f"{len(plans)} plans for a batch of {spec_batch.shape[0]}"
        )
    cfg = encoder.cfg
    grid = PatchGrid.for_shape(spec_batch.shape[1], spec_batch.shape[2], cfg.patch_size)
    for plan in plans:
        if plan.n_tokens != grid.n_tokens:
            raise ContractError(
                "reconstruct",
                f"plan covers {plan.n_tokens} tokens, grid has {grid.n_tokens}",
            )
    counts = {plan.n_masked for plan in plans}
    if len(counts) != 1:
        raise ContractError("reconstruct", f"masked counts differ: {sorted(counts)}")
    if counts.pop() >= grid.n_tokens:
        raise ContractError("reconstruct", "every token is masked")

    visible = np.array([plan.visible_indices for plan in plans], dtype=np.intp)
    restore = np.stack([plan.restore_order() for plan in plans])
    tokens, _ = encoder.forward_tokens(spec_batch, visible)
    return decoder(tokens, restore), grid
