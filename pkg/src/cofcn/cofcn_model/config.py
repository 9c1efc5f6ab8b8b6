"""Architecture configuration of the conditional FCN and the baseline U-Net."""

from enum import Enum
from typing import Tuple

from pydantic import (
    BaseModel,
    Field,
    validator,
)


__all__ = ["ModelKind", "CoFcnConfig", "ALLOWED_SHOTS"]

ALLOWED_SHOTS = (1, 2, 4, 8)


class ModelKind(str, Enum):
    COFCN = "cofcn"
    UNET = "unet"


class CoFcnConfig(BaseModel):
    """Feature map ladder and channel widths of the networks"""

    k_shots: int = Field(
        8,
        description="Number of support shots of the conditioning branch",
    )

    spatial_dims: Tuple[int, int, int, int, int] = Field(
        (128, 64, 32, 16, 8),
        description="Feature map edge length at every encoder level and the bottleneck",
    )

    encoder_channels: Tuple[int, int, int, int] = Field(
        (32, 64, 128, 256),
        description="Encoder widths C1..C4 (the bottleneck keeps C4)",
    )

    decoder_channels: Tuple[int, int, int, int] = Field(
        (32, 32, 64, 128),
        description="Decoder widths D1..D4",
    )

    seg_in_channels: int = Field(3, description="Query image channels")

    @validator("k_shots")
    def check_k(cls, v: int) -> int:
        assert v in ALLOWED_SHOTS, f"k_shots must be one of {ALLOWED_SHOTS}"
        return v

    @validator("spatial_dims")
    def check_ladder(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        for upper, lower in zip(v, v[1:]):
            assert upper == 2 * lower, "spatial dims must halve at every level"
        return v

    @validator("encoder_channels", "decoder_channels")
    def check_widths(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        assert all(c >= 1 for c in v), "channel widths must be positive"
        return v

    @property
    def cond_in_channels(self) -> int:
        """The conditioning input carries 3 image channels per shot and no masks"""
        return self.seg_in_channels * self.k_shots
