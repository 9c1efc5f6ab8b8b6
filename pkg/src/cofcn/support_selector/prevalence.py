"""Per cluster lesion prevalence estimates."""

from typing import (
    Sequence,
    Tuple,
)

import numpy as np

from ..core.errors import NonFiniteInputError
from ..core.model import PatchLabel


__all__ = ["class_ratios", "estimate_pi"]

RATIO_SUM_TOLERANCE = 1e-9


def class_ratios(
    cluster_ids: Sequence[int],
    labels: Sequence[PatchLabel],
    n_components: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Share of each class's patches falling into each cluster.

    Returns:
        `(r_pos, r_neg)`, each summing to 1 unless the class is absent (all 0)
    """
    if len(cluster_ids) != len(labels):
        raise ValueError("Need exactly one label per cluster id")
    ids = np.asarray(cluster_ids, dtype=int)
    lesion = np.asarray(
        [PatchLabel.validate(lab) == PatchLabel.LESION for lab in labels], dtype=bool
    )
    if ids.size and (ids.min() < 0 or ids.max() >= n_components):
        raise ValueError(f"cluster ids must be in 0..{n_components - 1}")

    def ratios(mask: np.ndarray) -> np.ndarray:
        counts = np.bincount(ids[mask], minlength=n_components).astype(np.float64)
        total = counts.sum()
        return counts / total if total > 0 else counts

    return ratios(lesion), ratios(~lesion)


def estimate_pi(r_pos: Sequence[float], r_neg: Sequence[float]) -> np.ndarray:
    """Lesion prevalence `r_pos / (r_pos + r_neg)` of every cluster.

    Clusters without any support patch get a prevalence of 0.

    Raises:
        ValueError: If a ratio is negative or a ratio vector sums to more than 1
    """
    pos = np.asarray(r_pos, dtype=np.float64)
    neg = np.asarray(r_neg, dtype=np.float64)
    if pos.shape != neg.shape:
        raise ValueError("r_pos and r_neg must have the same length")
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise NonFiniteInputError("Class ratios must be finite")
    if np.any(pos < 0) or np.any(neg < 0):
        raise ValueError("Class ratios must be non-negative")
    for name, ratio in (("r_pos", pos), ("r_neg", neg)):
        if ratio.sum() > 1 + RATIO_SUM_TOLERANCE:
            raise ValueError(f"{name} sums to {ratio.sum()} > 1")

    total = pos + neg
    pi = np.zeros_like(total)
    np.divide(pos, total, out=pi, where=total > 0)
    return pi
