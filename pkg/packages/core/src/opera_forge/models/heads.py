"""Contrastive heads: the projector and the bilinear similarity."""

import numpy as np

from opera_forge.autodiff import ops
from opera_forge.autodiff.tensor import Tensor
from opera_forge.core.exceptions import InvalidInputError, ShapeError
from opera_forge.models.layers import Linear, Module, parameter


class Projector(Module):
    """Two-layer MLP from the encoder embedding to the similarity space."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator) -> None:
        self.fc1 = Linear(in_dim, out_dim, rng)
        self.fc2 = Linear(out_dim, out_dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(ops.gelu(self.fc1(x)))


class BilinearHead(Module):
    """Learned ``p x p`` matrix ``W`` scoring ``za^T W zb``.

    ``W`` starts at the identity plus N(0, 0.02) noise.
    """

    def __init__(self, dim: int, rng: np.random.Generator) -> None:
        self.W = parameter(np.eye(dim) + rng.normal(0.0, 0.02, (dim, dim)))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "BilinearHead":
        """Head with a fixed ``W``; the dtype of ``matrix`` is kept.

        Raises:
            ShapeError: If ``matrix`` is not square
            InvalidInputError: If ``matrix`` holds NaN or inf
        """
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ShapeError("bilinear head", matrix.shape)
        if not np.all(np.isfinite(matrix)):
            raise InvalidInputError("bilinear head", "W must be finite")
        head = cls.__new__(cls)
        head.W = Tensor(matrix, requires_grad=True, dtype=matrix.dtype)
        return head

    @property
    def dim(self) -> int:
        return int(self.W.shape[0])

    def similarity_matrix(self, za: Tensor, zb: Tensor) -> Tensor:
        """``S[i, j] = za[i]^T W zb[j]`` for ``(B, p)`` inputs."""
        if za.ndim != 2 or za.shape != zb.shape or za.shape[1] != self.dim:
            raise ShapeError("similarity_matrix", za.shape, zb.shape)
        return ops.matmul(ops.matmul(za, self.W), ops.transpose(zb))

    def forward(self, za: Tensor, zb: Tensor) -> Tensor:
        return self.similarity_matrix(za, zb)


def bilinear_similarity(
    z1: np.ndarray | Tensor, z2: np.ndarray | Tensor, head: BilinearHead
) -> float:
    """``z1^T W z2`` for two vectors of length ``p``.

    Raises:
        ShapeError: If either vector does not have length ``p``
    """
    a = np.asarray(z1.data if isinstance(z1, Tensor) else z1, dtype=np.float64)
    b = np.asarray(z2.data if isinstance(z2, Tensor) else z2, dtype=np.float64)
    if a.shape != (head.dim,) or b.shape != (head.dim,):
        raise ShapeError("bilinear_similarity", a.shape, b.shape)
    return float(a @ head.W.data.astype(np.float64) @ b)
