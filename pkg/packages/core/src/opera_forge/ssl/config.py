"""Pretraining hyperparameters."""

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from opera_forge.core.types import PretrainMethod

MAX_EPOCHS = 200

# Crop lengths in frames (16 kHz, 32 ms hop): 2 s -> 63, 4 s -> 126, 8 s -> 251.
DEFAULT_CROP_FRAMES: dict[str, int] = {
    "*/cough": 63,
    "*/breath": 251,
    "*/lung": 251,
    "*/snore": 126,
    "*/vowel": 126,
    "ukcovid/breath": 126,
    "synth/breath": 64,
}


class PretrainConfig(BaseModel):
    """Objective, optimizer and batching for self-supervised pretraining."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    method: PretrainMethod = PretrainMethod.CONTRASTIVE
    epochs: int = Field(default=30, ge=1, le=MAX_EPOCHS)
    lr: float = Field(default=1e-3, gt=0.0, description="Adam learning rate")
    batch_size: int = Field(default=16, ge=1)
    crop_frames: dict[str, int] = Field(
        default_factory=lambda: dict(DEFAULT_CROP_FRAMES),
        description="Crop length per 'source/modality'; '*' matches any source",
    )
    mask_ratio: float = Field(default=0.7, gt=0.0, lt=1.0)
    val_fraction: float = Field(default=0.1, gt=0.0, lt=1.0)
    hybrid_weight: float = Field(
        default=0.5, ge=0.0, le=1.0, description="Weight of the contrastive term"
    )
    symmetric: bool = Field(
        default=False, description="Average the a->b and b->a contrastive losses"
    )
    seed: int = 0

    @field_validator("crop_frames")
    @classmethod
    def _check_crops(cls, v: dict[str, int]) -> dict[str, int]:
        for key, frames in v.items():
            if key.count("/") != 1:
                raise ValueError(f"crop key '{key}' must look like 'source/modality'")
            if frames < 1:
                raise ValueError(f"crop for '{key}' must be >= 1 frame, got {frames}")
        return v

    @model_validator(mode="after")
    def _check_batch(self) -> "PretrainConfig":
        uses_pairs = self.method != PretrainMethod.GENERATIVE
        if uses_pairs and self.batch_size < 2:
            raise ValueError(f"{self.method} pretraining needs batch_size >= 2")
        return self
