"""Training hyper parameters."""

from pydantic import (
    Field,
    validator,
)

from ..cofcn_model.config import ALLOWED_SHOTS
from ..core.config import SeededConfig
from ..core.util import (
    greater_zero,
    open_unit_interval,
)


__all__ = ["TrainConfig"]


class TrainConfig(SeededConfig):
    """Optimizer, loss weights and stopping rule of network training"""

    learning_rate: float = Field(0.001, description="Adam initial learning rate")

    adam_beta1: float = Field(0.9, description="Adam beta 1")

    adam_beta2: float = Field(0.999, description="Adam beta 2")

    lesion_weight: float = Field(
        4.0,
        description="Weight w_l of lesion pixels in the weighted BCE",
    )

    pretext_weight: float = Field(
        0.2,
        description="Weight w of the conditioning pretext loss",
    )

    k_shots: int = Field(8, description="Number of support shots")

    patience: int = Field(
        3,
        ge=1,
        description="Epochs without validation improvement before stopping",
    )

    train_fraction: float = Field(
        0.75,
        description="Fraction of the query patches used for training (rest validates)",
    )

    max_epochs: int = Field(50, ge=1, description="Maximum number of epochs")

    batch_size: int = Field(8, ge=1, description="(query, support) pairs per batch")

    @validator("k_shots")
    def check_k(cls, v: int) -> int:
        assert v in ALLOWED_SHOTS, f"k_shots must be one of {ALLOWED_SHOTS}"
        return v

    _validate_positive = validator(
        "learning_rate", "lesion_weight", "pretext_weight", allow_reuse=True
    )(greater_zero)
    _validate_unit = validator(
        "train_fraction", "adam_beta1", "adam_beta2", allow_reuse=True
    )(open_unit_interval)
