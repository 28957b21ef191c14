"""Tiny CNN encoder: three stride-2 conv blocks and global average pooling."""

import numpy as np

from opera_forge.autodiff import ops
from opera_forge.autodiff.tensor import Tensor
from opera_forge.core.exceptions import LengthError, ShapeError
from opera_forge.models.config import EncoderConfig
from opera_forge.models.layers import Linear, Module, parameter


class ConvBlock(Module):
    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator) -> None:
        fan_in = in_ch * 9
        self.weight = parameter(
            rng.normal(0.0, np.sqrt(2.0 / fan_in), (out_ch, in_ch, 3, 3))
        )
        self.bias = parameter(np.zeros(out_ch))

    def forward(self, x: Tensor) -> Tensor:
        out = ops.conv2d(x, self.weight, stride=2)
        bias = ops.reshape(self.bias, (1, self.bias.shape[0], 1, 1))
        return ops.relu(ops.add(out, bias))


class CnnEncoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator) -> None:
        self._cfg = cfg
        c1, c2, c3 = cfg.cnn_channels
        self.conv1 = ConvBlock(1, c1, rng)
        self.conv2 = ConvBlock(c1, c2, rng)
        self.conv3 = ConvBlock(c2, c3, rng)
        if c3 != cfg.embed_dim:
            self.out = Linear(c3, cfg.embed_dim, rng)

    @property
    def cfg(self) -> EncoderConfig:
        return self._cfg

    def forward(self, x: Tensor) -> Tensor:
        """``(B, F, M)`` -> ``(B, d)``.

        Raises:
            LengthError: If ``F`` is below the minimum the conv stack accepts
        """
        cfg = self._cfg
        if x.ndim != 3 or x.shape[2] != cfg.n_mels:
            raise ShapeError("cnn input", x.shape, (-1, -1, cfg.n_mels))
        if x.shape[1] < cfg.min_frames:
            raise LengthError(x.shape[1], cfg.min_frames)
        h = ops.reshape(x, (x.shape[0], 1, x.shape[1], x.shape[2]))
        h = self.conv3(self.conv2(self.conv1(h)))
        pooled = ops.reduce_mean(h, axis=(2, 3))
        if hasattr(self, "out"):
            pooled = self.out(pooled)
        return pooled
