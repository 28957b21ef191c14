"""Building blocks: parameter containers, linear layers, attention."""

from __future__ import annotations

from typing import Any

import numpy as np
from scipy import stats

from opera_forge.autodiff import ops
from opera_forge.autodiff.tensor import Tensor
from opera_forge.core.exceptions import ShapeError


def trunc_normal(
    rng: np.random.Generator, shape: tuple[int, ...], std: float = 0.02
) -> np.ndarray:
    """Normal samples truncated at two standard deviations."""
    values = stats.truncnorm.rvs(-2.0, 2.0, scale=std, size=shape, random_state=rng)
    return np.asarray(values, dtype=np.float32)


def parameter(values: np.ndarray) -> Tensor:
    return Tensor(np.asarray(values, dtype=np.float32), requires_grad=True)


class Module:
    """Container whose attributes are parameters, sub-modules or lists of them.

    Parameter names are dotted attribute paths, e.g. ``blocks.0.attn.q.weight``.
    """

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        found: dict[str, Tensor] = {}
        for attr, value in vars(self).items():
            if attr.startswith("_"):
                continue
            name = f"{prefix}{attr}"
            if isinstance(value, Tensor) and value.requires_grad:
                found[name] = value
            elif isinstance(value, Module):
                found.update(value.named_parameters(f"{name}."))
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        found.update(item.named_parameters(f"{name}.{i}."))
        return found

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """Copy weights in by name.

        Raises:
            ShapeError: If a weight is missing or has the wrong shape
        """
        for name, param in self.named_parameters().items():
            if name not in state:
                raise ShapeError(f"load_state_dict[{name}] missing", param.shape)
            value = np.asarray(state[name])
            if value.shape != param.shape:
                raise ShapeError(f"load_state_dict[{name}]", param.shape, value.shape)
            param.data = value.astype(param.data.dtype, copy=True)

    def astype(self, dtype: Any) -> Module:
        """Cast every parameter in place (float64 for gradient checks)."""
        for param in self.named_parameters().values():
            param.data = param.data.astype(dtype)
        return self


class Linear(Module):
    def __init__(
        self, in_dim: int, out_dim: int, rng: np.random.Generator, std: float = 0.02
    ) -> None:
        self.weight = parameter(trunc_normal(rng, (in_dim, out_dim), std))
        self.bias = parameter(np.zeros(out_dim))

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.weight.shape[0]:
            raise ShapeError("linear", x.shape, self.weight.shape)
        if x.ndim == 1:
            x = ops.reshape(x, (1, x.shape[0]))
        return ops.add(ops.matmul(x, self.weight), self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int) -> None:
        self.gamma = parameter(np.ones(dim))
        self.beta = parameter(np.zeros(dim))

    def forward(self, x: Tensor) -> Tensor:
        return ops.add(ops.mul(ops.layer_norm(x), self.gamma), self.beta)


class MLP(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator) -> None:
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(ops.gelu(self.fc1(x)))


class MultiHeadAttention(Module):
    """Global self-attention over ``(B, T, d)`` built from primitives."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator) -> None:
        if dim % heads:
            raise ShapeError("attention heads", (dim,), (heads,))
        self._heads = heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.proj = Linear(dim, dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        x = ops.reshape(x, (b, t, self._heads, d // self._heads))
        return ops.transpose(x, (0, 2, 1, 3))

    def forward(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        q, k, v = self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x))
        scores = ops.scale(
            ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))),
            1.0 / float(np.sqrt(d // self._heads)),
        )
        context = ops.matmul(ops.softmax(scores), v)
        merged = ops.reshape(ops.transpose(context, (0, 2, 1, 3)), (b, t, d))
        return self.proj(merged)


class TransformerBlock(Module):
    """Pre-norm block: ``x + attn(ln(x))`` then ``x + mlp(ln(x))``."""

    def __init__(
        self, dim: int, heads: int, mlp_ratio: float, rng: np.random.Generator
    ) -> None:
        self.norm1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.norm2 = LayerNorm(dim)
        self.mlp = MLP(dim, max(1, int(dim * mlp_ratio)), rng)

    def forward(self, x: Tensor) -> Tensor:
        x = ops.add(x, self.attn(self.norm1(x)))
        return ops.add(x, self.mlp(self.norm2(x)))
