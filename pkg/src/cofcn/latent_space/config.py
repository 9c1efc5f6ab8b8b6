"""Autoencoder configuration and latent space record models."""

import math

from typing import List

import numpy as np

from pydantic import (
    BaseModel,
    Field,
    validator,
)

from ..core.config import SeededConfig
from ..core.model import PatchRef
from ..core.util import (
    greater_zero,
    open_unit_interval,
)


__all__ = ["LATENT_CHANNELS", "AutoencoderConfig", "LatentVector", "PcaModel"]

LATENT_CHANNELS = 8


class AutoencoderConfig(SeededConfig):
    """Per center convolutional autoencoder training configuration"""

    latent_channels: int = Field(
        LATENT_CHANNELS,
        description="Channels of the latent map (spatially averaged to the embedding)",
    )

    learning_rate: float = Field(0.004, description="Adam initial learning rate")

    adam_beta1: float = Field(0.9, description="Adam beta 1")

    adam_beta2: float = Field(0.999, description="Adam beta 2")

    early_stop_patience: int = Field(
        3,
        ge=1,
        description="Epochs without validation improvement before stopping",
    )

    train_fraction: float = Field(
        0.8,
        description="Fraction of the support patches used for training",
    )

    max_epochs: int = Field(100, ge=1, description="Maximum number of epochs")

    batch_size: int = Field(16, ge=1, description="Mini batch size")

    @validator("latent_channels")
    def check_latent_channels(cls, v: int) -> int:
        assert v == LATENT_CHANNELS, f"latent_channels must be {LATENT_CHANNELS}"
        return v

    _validate_lr = validator("learning_rate", allow_reuse=True)(greater_zero)
    _validate_fraction = validator("train_fraction", allow_reuse=True)(
        open_unit_interval
    )
    _validate_betas = validator("adam_beta1", "adam_beta2", allow_reuse=True)(
        open_unit_interval
    )


class LatentVector(BaseModel):
    """Spatially averaged latent representation of one patch"""

    values: List[float] = Field(..., description="The 8 channel means")
    patch_ref: PatchRef

    @validator("values")
    def check_values(cls, v: List[float]) -> List[float]:
        assert len(v) == LATENT_CHANNELS, f"expected {LATENT_CHANNELS} values"
        assert all(math.isfinite(x) for x in v), "latent values must be finite"
        return v


class PcaModel(BaseModel):
    """Linear projection of latent vectors onto their main components"""

    mean: List[float]
    components: List[List[float]] = Field(
        ...,
        description="Orthonormal component rows, ordered by explained variance",
    )
    explained_variance: List[float]

    @validator("components")
    def check_orthonormal(cls, v: List[List[float]]) -> List[List[float]]:
        rows = np.asarray(v, dtype=float)
        gram = rows @ rows.T
        assert np.allclose(
            gram, np.eye(len(rows)), atol=1e-6
        ), "component rows must be orthonormal"
        return v

    @validator("explained_variance")
    def check_ordering(cls, v: List[float]) -> List[float]:
        assert all(
            a >= b for a, b in zip(v, v[1:])
        ), "explained variance must be non-increasing"
        return v

    @property
    def dims(self) -> int:
        return len(self.components)
