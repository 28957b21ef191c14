"""Patch grids, patchify and mask sampling.

Tokens follow a time-major row scan: token ``r * cols + c`` covers frames
``r*p .. r*p+p-1`` and mel bins ``c*p .. c*p+p-1``.
"""

from dataclasses import dataclass

import numpy as np

from opera_forge.autodiff import ops
from opera_forge.autodiff.tensor import Tensor
from opera_forge.core.exceptions import ConfigError, ShapeError


@dataclass(frozen=True)
class PatchGrid:
    rows: int
    cols: int
    patch: int = 4

    @classmethod
    def for_shape(cls, n_frames: int, n_mels: int, patch: int = 4) -> "PatchGrid":
        """Grid after right-padding frames up to a multiple of ``patch``."""
        if n_mels % patch:
            raise ShapeError("patch grid", (n_frames, n_mels), (patch, patch))
        return cls(rows=-(-n_frames // patch), cols=n_mels // patch, patch=patch)

    @property
    def n_tokens(self) -> int:
        return self.rows * self.cols

    @property
    def padded_frames(self) -> int:
        return self.rows * self.patch

    def token_index(self, row: int, col: int) -> int:
        return row * self.cols + col

    def position(self, token: int) -> tuple[int, int]:
        row, col = divmod(token, self.cols)
        return row, col


def pad_frames(values: np.ndarray, multiple: int, fill: float) -> np.ndarray:
    """Right-pad axis -2 (frames) of ``values`` to a multiple of ``multiple``."""
    n_frames = values.shape[-2]
    extra = -n_frames % multiple
    if not extra:
        return values
    widths = [(0, 0)] * values.ndim
    widths[-2] = (0, extra)
    return np.pad(values, widths, constant_values=fill)


def patchify(x: Tensor, patch: int) -> Tensor:
    """``(B, F, M)`` -> ``(B, (F/p)*(M/p), p*p)``; ``F`` and ``M`` multiples of p."""
    b, f, m = x.shape
    if f % patch or m % patch:
        raise ShapeError("patchify", x.shape, (patch, patch))
    rows, cols = f // patch, m // patch
    x = ops.reshape(x, (b, rows, patch, cols, patch))
    x = ops.transpose(x, (0, 1, 3, 2, 4))
    return ops.reshape(x, (b, rows * cols, patch * patch))


def patchify_array(values: np.ndarray, patch: int) -> np.ndarray:
    b, f, m = values.shape
    rows, cols = f // patch, m // patch
    out = values.reshape(b, rows, patch, cols, patch).transpose(0, 1, 3, 2, 4)
    return out.reshape(b, rows * cols, patch * patch)


def unpatchify_array(tokens: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Inverse of :func:`patchify_array` for one item: ``(n, p*p) -> (F, M)``."""
    p = grid.patch
    out = tokens.reshape(grid.rows, grid.cols, p, p).transpose(0, 2, 1, 3)
    return out.reshape(grid.rows * p, grid.cols * p)


@dataclass(frozen=True)
class MaskPlan:
    """Which tokens are hidden from the encoder."""

    n_tokens: int
    ratio: float
    masked_indices: tuple[int, ...]

    @property
    def visible_indices(self) -> tuple[int, ...]:
        hidden = set(self.masked_indices)
        return tuple(i for i in range(self.n_tokens) if i not in hidden)

    @property
    def n_masked(self) -> int:
        return len(self.masked_indices)

    def restore_order(self) -> np.ndarray:
        """Positions that put ``visible + masked`` back into grid order."""
        return np.argsort(np.array(self.visible_indices + self.masked_indices))


def mask_count(n_tokens: int, ratio: float) -> int:
    """``round(ratio * n)`` with halves rounded up."""
    return int(np.floor(ratio * n_tokens + 0.5))


def sample_mask(n_tokens: int, ratio: float, rng: np.random.Generator) -> MaskPlan:
    """Draw ``round(ratio * n_tokens)`` distinct token indices uniformly.

    Raises:
        ConfigError: If ``ratio`` is outside ``[0, 1]``
    """
    if not 0.0 <= ratio <= 1.0:
        raise ConfigError("mask_ratio", f"{ratio} is outside [0, 1]")
    count = mask_count(n_tokens, ratio)
    chosen = np.sort(rng.permutation(n_tokens)[:count])
    return MaskPlan(
        n_tokens=n_tokens, ratio=ratio, masked_indices=tuple(int(i) for i in chosen)
    )
