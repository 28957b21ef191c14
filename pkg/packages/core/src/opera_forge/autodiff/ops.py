"""Differentiable primitives.

Each op is a :class:`Function` with a forward on arrays and a backward rule;
the lowercase wrappers below are the public API. Binary elementwise ops
broadcast like numpy and sum gradients back over broadcast axes.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from opera_forge.autodiff.tensor import Function, Tensor, as_tensor
from opera_forge.core.exceptions import ContractError, ShapeError

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def _normalize_axes(axis: int | Sequence[int] | None, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(sorted(a % ndim for a in axes))


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(grad, self.shapes[0]), -_unbroadcast(grad, self.shapes[1])


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            _unbroadcast(grad * self.b, self.a.shape),
            _unbroadcast(grad * self.a, self.b.shape),
        )


class MatMul(Function):
    """Batched matrix product over the last two axes."""

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = np.matmul(grad, np.swapaxes(self.b, -1, -2))
        gb = np.matmul(np.swapaxes(self.a, -1, -2), grad)
        return _unbroadcast(ga, self.a.shape), _unbroadcast(gb, self.b.shape)


class Conv2d(Function):
    """Valid 2-D cross-correlation of ``(N, C, H, W)`` with ``(O, C, kh, kw)``."""

    def forward(self, x: np.ndarray, w: np.ndarray, stride: int = 1) -> np.ndarray:
        kh, kw = w.shape[2:]
        self.cols = sliding_window_view(x, (kh, kw), axis=(2, 3))[
            :, :, ::stride, ::stride
        ]
        self.w, self.x_shape, self.stride = w, x.shape, stride
        return np.einsum("nchwij,ocij->nohw", self.cols, w, optimize=True)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gw = np.einsum("nohw,nchwij->ocij", grad, self.cols, optimize=True)
        dcols = np.einsum("nohw,ocij->nchwij", grad, self.w, optimize=True)
        gx = np.zeros(self.x_shape, dtype=grad.dtype)
        s = self.stride
        out_h, out_w = grad.shape[2:]
        kh, kw = self.w.shape[2:]
        for i in range(kh):
            for j in range(kw):
                rows = slice(i, i + s * (out_h - 1) + 1, s)
                cols = slice(j, j + s * (out_w - 1) + 1, s)
                gx[:, :, rows, cols] += dcols[..., i, j]
        return gx, gw


class Sum(Function):
    def forward(
        self, x: np.ndarray, axis: tuple[int, ...] = (), keepdims: bool = False
    ) -> np.ndarray:
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        return np.asarray(x.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape),)


class Mean(Sum):
    def forward(
        self, x: np.ndarray, axis: tuple[int, ...] = (), keepdims: bool = False
    ) -> np.ndarray:
        self.count = int(np.prod([x.shape[a] for a in axis])) if axis else 1
        return super().forward(x, axis, keepdims) / self.count

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (super().backward(grad)[0] / self.count,)


class Reshape(Function):
    def forward(self, x: np.ndarray, shape: tuple[int, ...] = ()) -> np.ndarray:
        self.shape = x.shape
        return x.reshape(shape)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, x: np.ndarray, axes: tuple[int, ...] = ()) -> np.ndarray:
        self.inverse = tuple(np.argsort(axes))
        return x.transpose(axes)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.transpose(self.inverse),)


class Concat(Function):
    def forward(self, *xs: np.ndarray, axis: int = 0) -> np.ndarray:
        self.axis = axis
        self.splits = np.cumsum([x.shape[axis] for x in xs])[:-1]
        return np.concatenate(xs, axis=axis)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.split(grad, self.splits, axis=self.axis))


class IndexSelect(Function):
    """Select entries along one axis with a 1-D index array (repeats allowed)."""

    def forward(
        self, x: np.ndarray, indices: np.ndarray | None = None, axis: int = 0
    ) -> np.ndarray:
        self.shape, self.indices, self.axis = x.shape, indices, axis
        return np.take(x, indices, axis=axis)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        gx = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(
            np.moveaxis(gx, self.axis, 0), self.indices, np.moveaxis(grad, self.axis, 0)
        )
        return (gx,)


class Gather(Function):
    """Per-row selection with ``numpy.take_along_axis`` semantics."""

    def forward(
        self, x: np.ndarray, index: np.ndarray | None = None, axis: int = 0
    ) -> np.ndarray:
        self.shape, self.index, self.axis = x.shape, index, axis
        return np.take_along_axis(x, index, axis=axis)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        gx = np.zeros(self.shape, dtype=grad.dtype)
        grid = list(np.indices(self.index.shape, sparse=True))
        grid[self.axis] = self.index
        np.add.at(gx, tuple(grid), grad)
        return (gx,)


class Relu(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * self.mask,)


class Gelu(Function):
    """Exact GELU, ``x * Phi(x)``."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        self.cdf = 0.5 * (1.0 + special.erf(x / _SQRT2))
        return (x * self.cdf).astype(x.dtype)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * self.x * self.x)
        return ((grad * (self.cdf + self.x * pdf)).astype(grad.dtype),)


class LayerNorm(Function):
    """Normalize the last axis to zero mean and unit variance (no affine)."""

    def forward(self, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.xhat = (x - mu) * self.inv_std
        return self.xhat

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        g_mean = grad.mean(axis=-1, keepdims=True)
        gx_mean = (grad * self.xhat).mean(axis=-1, keepdims=True)
        return (self.inv_std * (grad - g_mean - self.xhat * gx_mean),)


class Softmax(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        shifted = np.exp(x - x.max(axis=-1, keepdims=True))
        self.s = shifted / shifted.sum(axis=-1, keepdims=True)
        return self.s

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        dot = (grad * self.s).sum(axis=-1, keepdims=True)
        return (self.s * (grad - dot),)


class Log(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        return np.log(x)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad / self.x,)


class Scale(Function):
    def forward(self, x: np.ndarray, factor: float = 1.0) -> np.ndarray:
        self.factor = factor
        return (x * factor).astype(x.dtype)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return ((grad * self.factor).astype(grad.dtype),)


class Abs(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * self.sign,)


def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return Add.apply(a, b)


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return Sub.apply(a, b)


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    return Mul.apply(a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape) from None
    return MatMul.apply(a, b)


def conv2d(x: Tensor, w: Tensor, stride: int = 1) -> Tensor:
    """Valid (unpadded) strided convolution, ``(N, C, H, W) * (O, C, kh, kw)``."""
    if (
        x.ndim != 4
        or w.ndim != 4
        or x.shape[1] != w.shape[1]
        or x.shape[2] < w.shape[2]
        or x.shape[3] < w.shape[3]
    ):
        raise ShapeError("conv2d", x.shape, w.shape)
    if stride < 1:
        raise ContractError("conv2d", f"stride must be >= 1, got {stride}")
    return Conv2d.apply(x, w, stride=stride)


def reduce_sum(
    x: Tensor, axis: int | Sequence[int] | None = None, keepdims: bool = False
) -> Tensor:
    return Sum.apply(x, axis=_normalize_axes(axis, x.ndim), keepdims=keepdims)


def reduce_mean(
    x: Tensor, axis: int | Sequence[int] | None = None, keepdims: bool = False
) -> Tensor:
    return Mean.apply(x, axis=_normalize_axes(axis, x.ndim), keepdims=keepdims)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        np.empty(x.shape, dtype=np.bool_).reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", x.shape, tuple(shape)) from None
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    order = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    if sorted(a % x.ndim for a in order) != list(range(x.ndim)):
        raise ShapeError("transpose", x.shape, order)
    return Transpose.apply(x, axes=order)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    first = tensors[0]
    for other in tensors[1:]:
        same = [d for i, d in enumerate(other.shape) if i != axis % first.ndim]
        ref = [d for i, d in enumerate(first.shape) if i != axis % first.ndim]
        if other.ndim != first.ndim or same != ref:
            raise ShapeError("concat", first.shape, other.shape)
    return Concat.apply(*tensors, axis=axis)


def index_select(x: Tensor, indices: Any, axis: int = 0) -> Tensor:
    idx = np.asarray(indices, dtype=np.intp)
    size = x.shape[axis]
    if idx.ndim != 1:
        raise ShapeError("index_select", x.shape, idx.shape)
    if idx.size and (idx.min() < -size or idx.max() >= size):
        raise ContractError("index_select", f"index out of range for axis size {size}")
    return IndexSelect.apply(x, indices=idx, axis=axis)


def gather(x: Tensor, index: Any, axis: int) -> Tensor:
    idx = np.asarray(index, dtype=np.intp)
    if idx.ndim != x.ndim:
        raise ShapeError("gather", x.shape, idx.shape)
    return Gather.apply(x, index=idx, axis=axis)


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


def gelu(x: Tensor) -> Tensor:
    return Gelu.apply(x)


def layer_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, eps=eps)


def softmax(x: Tensor) -> Tensor:
    return Softmax.apply(x)


def log(x: Tensor) -> Tensor:
    return Log.apply(x)


def scale(x: Tensor, factor: float) -> Tensor:
    return Scale.apply(x, factor=factor)


def absolute(x: Tensor) -> Tensor:
    return Abs.apply(x)
