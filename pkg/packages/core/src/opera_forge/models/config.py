"""Encoder/decoder hyperparameters."""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from opera_forge.core.types import EncoderKind

# Three valid 3x3 stride-2 convolutions need at least 15 input frames.
CNN_MIN_FRAMES = 15


class EncoderConfig(BaseModel):
    """Architecture of the encoder and the pretraining heads.

    Defaults are desk scale; the larger published configuration is
    ``embed_dim=384, depth=12, heads=2``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: EncoderKind = Field(default=EncoderKind.VIT, description="cnn or vit")
    n_mels: int = Field(default=64, ge=1)
    embed_dim: int = Field(default=64, ge=1, description="Output feature size d")
    depth: int = Field(default=2, ge=1, description="Transformer blocks")
    heads: int = Field(default=2, ge=1, description="Attention heads")
    mlp_ratio: float = Field(default=2.0, gt=0.0)
    patch_size: int = Field(default=4, ge=1, description="Square patch side")
    max_positions: int = Field(
        default=1024, ge=1, description="Learned positional embeddings"
    )
    max_input_frames: int = Field(
        default=256, ge=1, description="Longest segment fed to the encoder"
    )
    min_input_frames: int | None = Field(
        default=None, ge=1, description="Shortest accepted input (kind default)"
    )
    cnn_channels: tuple[int, int, int] = Field(default=(16, 32, 64))
    projector_dim: int = Field(default=64, ge=1, description="Contrastive head size")
    decoder_dim: int = Field(default=64, ge=1)
    decoder_depth: int = Field(default=2, ge=1)
    decoder_heads: int = Field(default=2, ge=1)

    @model_validator(mode="after")
    def _check_dims(self) -> "EncoderConfig":
        if self.embed_dim % self.heads:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )
        if self.decoder_dim % self.decoder_heads:
            raise ValueError(
                f"decoder_dim {self.decoder_dim} not divisible by "
                f"decoder_heads {self.decoder_heads}"
            )
        if self.kind == EncoderKind.VIT and self.n_mels % self.patch_size:
            raise ValueError(
                f"patch_size {self.patch_size} does not divide n_mels {self.n_mels}"
            )
        if self.min_frames > self.max_input_frames:
            raise ValueError(
                f"min_input_frames {self.min_frames} exceeds "
                f"max_input_frames {self.max_input_frames}"
            )
        return self

    @property
    def min_frames(self) -> int:
        if self.min_input_frames is not None:
            return self.min_input_frames
        return CNN_MIN_FRAMES if self.kind == EncoderKind.CNN else 1

    @property
    def patch_cells(self) -> int:
        return self.patch_size * self.patch_size

    @property
    def frame_multiple(self) -> int:
        """Frame counts must divide by this to avoid padding inside the encoder."""
        return self.patch_size if self.kind == EncoderKind.VIT else 1
