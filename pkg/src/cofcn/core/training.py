"""Helpers shared by the autoencoder and the segmentation network training loops."""

import random

from typing import (
    List,
    Optional,
    Tuple,
)

import numpy as np
import torch

from pydantic import (
    BaseModel,
    Field,
)


__all__ = [
    "EarlyStopping",
    "EpochMetrics",
    "IMPROVEMENT_DELTA",
    "seed_everything",
    "split_indices",
]

IMPROVEMENT_DELTA = 1e-6
"""A validation loss improves only if it undercuts the best loss by at least this"""


def seed_everything(seed: int) -> torch.Generator:
    """Seeds python, numpy and torch and returns a seeded torch generator."""
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator


class EarlyStopping:
    """Tracks validation losses and signals when training should stop.

    Training stops once the validation loss did not improve for `patience`
    consecutive epochs.
    """

    def __init__(self, patience: int, min_delta: float = IMPROVEMENT_DELTA):
        if patience < 1:
            raise ValueError("patience must be >= 1!")
        self.patience: int = patience
        self.min_delta: float = min_delta
        self.best: Optional[float] = None
        self.best_epoch: Optional[int] = None
        self.bad_epochs: int = 0

    def step(self, epoch: int, loss: float) -> bool:
        """Records the validation loss of an epoch.

        Args:
            epoch: The (1-based) epoch number
            loss: The validation loss

        Returns:
            `True` if the loss is a new best
        """
        if self.best is None or loss < self.best - self.min_delta:
            self.best = loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


class EpochMetrics(BaseModel):
    """Loss values recorded at the end of a training epoch"""

    epoch: int = Field(..., ge=1)
    train_loss: float
    val_loss: float
    learning_rate: float
    improved: bool = Field(
        False,
        description="If the validation loss was a new best in this epoch",
    )


def split_indices(
    n: int,
    train_fraction: float,
    seed: int,
) -> Tuple[List[int], List[int]]:
    """Shuffles `range(n)` with a seeded generator and splits it in two.

    Both parts are non-empty; their indices are returned in ascending order.

    Raises:
        ValueError: If fewer than 2 items are given
    """
    if n < 2:
        raise ValueError(
            f"Need at least 2 samples for a train/validation split, got {n}"
        )
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(n - 1, max(1, int(round(train_fraction * n))))
    return sorted(order[:n_train].tolist()), sorted(order[n_train:].tolist())
