"""Tensors with reverse-mode gradients.

Every differentiable op is a :class:`Function`; applying it to tensors that
require gradients records the function on the output as ``_ctx``. Node ids
come from a process-wide counter, so sorting reachable nodes by id gives a
valid topological order of the tape.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Any

import numpy as np

from opera_forge.core.exceptions import ContractError, InvalidInputError

_node_ids = itertools.count()
_default_dtype: ContextVar[type[np.floating[Any]]] = ContextVar(
    "default_dtype", default=np.float32
)
_grad_enabled: ContextVar[bool] = ContextVar("grad_enabled", default=True)
_debug_checks: ContextVar[bool] = ContextVar("debug_checks", default=False)


def default_dtype() -> type[np.floating[Any]]:
    return _default_dtype.get()


@contextmanager
def precision(dtype: type[np.floating[Any]]) -> Iterator[None]:
    """Create new tensors in ``dtype`` inside the block (float64 for grad checks)."""
    token = _default_dtype.set(dtype)
    try:
        yield
    finally:
        _default_dtype.reset(token)


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without recording a tape (inference, feature extraction)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


@contextmanager
def debug_checks() -> Iterator[None]:
    """Check every op output for NaN/inf inside the block."""
    token = _debug_checks.set(True)
    try:
        yield
    finally:
        _debug_checks.reset(token)


class Tensor:
    """An n-dimensional array that may take part in a gradient tape."""

    __slots__ = ("data", "requires_grad", "grad", "node_id", "_ctx")

    def __init__(
        self, data: Any, requires_grad: bool = False, dtype: Any | None = None
    ) -> None:
        self.data: np.ndarray = np.asarray(data, dtype=dtype or default_dtype())
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.node_id = next(_node_ids)
        self._ctx: Function | None = None

    @classmethod
    def constant(cls, data: Any) -> Tensor:
        return cls(data, requires_grad=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.data.dtype)

    def __repr__(self) -> str:
        grad_fn = f", grad_fn={type(self._ctx).__name__}" if self._ctx else ""
        return (
            f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{grad_fn})"
        )

    # Operators delegate to ops; imported lazily because ops imports this module.
    def __add__(self, other: Any) -> Tensor:
        from opera_forge.autodiff import ops

        return ops.add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        from opera_forge.autodiff import ops

        return ops.add(other, self)

    def __sub__(self, other: Any) -> Tensor:
        from opera_forge.autodiff import ops

        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        from opera_forge.autodiff import ops

        return ops.sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        from opera_forge.autodiff import ops

        if np.isscalar(other):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        return self.__mul__(other)

    def __truediv__(self, other: float) -> Tensor:
        from opera_forge.autodiff import ops

        return ops.scale(self, 1.0 / float(other))

    def __neg__(self) -> Tensor:
        from opera_forge.autodiff import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from opera_forge.autodiff import ops

        return ops.matmul(self, other)


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class Function:
    """Base class for differentiable ops.

    Subclasses implement ``forward`` on raw arrays (saving whatever the
    backward rule needs on ``self``) and ``backward`` returning one gradient,
    or ``None``, per input.
    """

    inputs: tuple[Tensor, ...] = ()

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs: Any) -> Tensor:
        fn = cls()
        out_data = fn.forward(*(t.data for t in inputs), **kwargs)
        out = Tensor(out_data, dtype=out_data.dtype)
        if _debug_checks.get() and not np.all(np.isfinite(out_data)):
            raise InvalidInputError(cls.__name__, "produced non-finite values")
        if _grad_enabled.get() and any(t.requires_grad for t in inputs):
            fn.inputs = inputs
            out.requires_grad = True
            out._ctx = fn
        return out

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError


@dataclass
class Tape:
    """Recorded nodes reachable from a loss, in creation order."""

    nodes: list[Tensor]

    @classmethod
    def from_loss(cls, loss: Tensor) -> Tape:
        seen: dict[int, Tensor] = {}
        stack = [loss]
        while stack:
            node = stack.pop()
            if node.node_id in seen:
                continue
            seen[node.node_id] = node
            if node._ctx is not None:
                stack.extend(t for t in node._ctx.inputs if t.requires_grad)
        return cls(nodes=sorted(seen.values(), key=lambda t: t.node_id))

    def release(self) -> None:
        """Drop recorded functions so intermediate buffers can be freed."""
        for node in self.nodes:
            node._ctx = None


def backward(loss: Tensor, retain_graph: bool = False) -> dict[int, np.ndarray]:
    """Reverse-mode sweep from a scalar loss.

    Sets ``.grad`` on every leaf that requires gradients and returns the same
    gradients keyed by ``node_id``. The tape is consumed unless
    ``retain_graph`` is set.

    Raises:
        ContractError: If ``loss`` is not a scalar
    """
    if loss.data.size != 1:
        raise ContractError("backward", f"loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}

    tape = Tape.from_loss(loss)
    grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    leaves: dict[int, np.ndarray] = {}

    for node in reversed(tape.nodes):
        grad = grads.pop(node.node_id, None)
        if grad is None:
            continue
        if node._ctx is None:
            node.grad = grad
            leaves[node.node_id] = grad
            continue
        for parent, parent_grad in zip(node._ctx.inputs, node._ctx.backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            if parent.node_id in grads:
                grads[parent.node_id] = grads[parent.node_id] + parent_grad
            else:
                grads[parent.node_id] = parent_grad

    if not retain_graph:
        tape.release()
    return leaves
