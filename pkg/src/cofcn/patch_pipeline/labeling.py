"""Patch labels derived from the central window of lesion masks."""

from typing import Tuple

import numpy as np

from ..core.errors import ShapeMismatchError
from ..core.model import PatchLabel
from .config import (
    CENTRAL_START,
    CENTRAL_STOP,
    PATCH_SIZE,
    LabelingRule,
)


__all__ = [
    "central_region",
    "label_patch_train",
    "label_patch_eval",
    "label_patch",
]


def central_region(array: np.ndarray) -> np.ndarray:
    """The central 64x64 window of a 128x128 patch (leading axes are kept)."""
    if array.shape[-2:] != (PATCH_SIZE, PATCH_SIZE):
        raise ShapeMismatchError(
            f"Expected a {PATCH_SIZE}x{PATCH_SIZE} patch, got {array.shape}"
        )
    return array[..., CENTRAL_START:CENTRAL_STOP, CENTRAL_START:CENTRAL_STOP]


def _central_fraction(mask_patch: np.ndarray) -> float:
    if mask_patch.ndim != 2:
        raise ShapeMismatchError(f"Expected a 2D mask, got {mask_patch.shape}")
    central = central_region(mask_patch) > 0
    return float(central.sum()) / central.size


def label_patch_train(mask_patch: np.ndarray) -> Tuple[PatchLabel, float]:
    """Training label: lesion iff at least 50% of the central window is lesion."""
    fraction = _central_fraction(mask_patch)
    label = PatchLabel.LESION if fraction >= 0.5 else PatchLabel.NON_LESION
    return label, fraction


def label_patch_eval(mask_patch: np.ndarray) -> PatchLabel:
    """Evaluation label: lesion iff any central pixel is lesion."""
    fraction = _central_fraction(mask_patch)
    return PatchLabel.LESION if fraction > 0 else PatchLabel.NON_LESION


def label_patch(
    mask_patch: np.ndarray,
    rule: LabelingRule,
) -> Tuple[PatchLabel, float]:
    if rule == LabelingRule.TRAIN_MAJORITY:
        return label_patch_train(mask_patch)
    return label_patch_eval(mask_patch), _central_fraction(mask_patch)
