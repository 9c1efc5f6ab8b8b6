"""Loss functions, data splits and training loops."""

from .config import TrainConfig
from .data import (
    PatchDataset,
    QueryPairDataset,
    split_records,
)
from .losses import (
    pretext_loss,
    total_loss,
    weighted_bce,
)
from .loop import (
    TrainResult,
    train,
)


__all__ = [
    "PatchDataset",
    "QueryPairDataset",
    "TrainConfig",
    "TrainResult",
    "pretext_loss",
    "split_records",
    "total_loss",
    "train",
    "weighted_bce",
]
