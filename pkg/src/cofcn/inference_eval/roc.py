"""ROC statistics: AUC, DeLong variance and test, partial AUC."""

import math

from typing import (
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from scipy.stats import (
    norm,
    rankdata,
)

from ..core.errors import (
    ShapeMismatchError,
    SingleClassError,
)
from .config import (
    DelongTestResult,
    RocResult,
)


__all__ = [
    "roc_auc",
    "delong_covariance",
    "delong_ci",
    "delong_test",
    "sig_code",
    "roc_curve",
    "pauc",
    "pauc_mcclish",
]

SIGNIFICANCE_CODES = ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, "."))


def _check(
    scores: Sequence[float],
    labels: Sequence[int],
) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 1 or x.shape != y.shape:
        raise ShapeMismatchError(
            f"Need one label per score, got {x.shape} scores and {y.shape} labels"
        )
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise SingleClassError(
            f"ROC statistics need both classes, got {n_pos} positives "
            f"and {len(y) - n_pos} negatives"
        )
    return x, y


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC with midranks for ties"""
    x, y = _check(scores, labels)
    m = int(y.sum())
    n = len(y) - m
    ranks = rankdata(x)
    return float((ranks[y == 1].sum() - m * (m + 1) / 2.0) / (m * n))


def delong_covariance(
    score_matrix: Sequence[Sequence[float]],
    labels: Sequence[int],
) -> Tuple[np.ndarray, np.ndarray]:
    """AUCs and their DeLong covariance for correlated score vectors.

    Uses the midrank formulation of the structural components.

    Args:
        score_matrix: One row of scores per classifier
        labels: The shared labels

    Returns:
        `(aucs, covariance)` of shapes `(K,)` and `(K, K)`
    """
    scores = np.atleast_2d(np.asarray(score_matrix, dtype=np.float64))
    for row in scores:
        _check(row, labels)
    y = np.asarray(labels, dtype=int)
    pos = scores[:, y == 1]
    neg = scores[:, y == 0]
    m, n = pos.shape[1], neg.shape[1]

    tx = np.apply_along_axis(rankdata, 1, pos)
    ty = np.apply_along_axis(rankdata, 1, neg)
    tz = np.apply_along_axis(rankdata, 1, np.concatenate([pos, neg], axis=1))
    aucs = (tz[:, :m].sum(axis=1) - m * (m + 1) / 2.0) / (m * n)

    v01 = (tz[:, :m] - tx) / n
    v10 = 1.0 - (tz[:, m:] - ty) / m
    k = scores.shape[0]
    sx = np.atleast_2d(np.cov(v01)) if m > 1 else np.zeros((k, k))
    sy = np.atleast_2d(np.cov(v10)) if n > 1 else np.zeros((k, k))
    return aucs, sx / m + sy / n


def sig_code(p_value: float) -> str:
    for threshold, code in SIGNIFICANCE_CODES:
        if p_value < threshold:
            return code
    return ""


def roc_curve(
    scores: Sequence[float],
    labels: Sequence[int],
) -> Tuple[np.ndarray, np.ndarray]:
    """False and true positive rates per distinct threshold, from (0, 0) to (1, 1)"""
    x, y = _check(scores, labels)
    order = np.argsort(-x, kind="mergesort")
    x, y = x[order], y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(x)), len(x) - 1]
    tp = np.cumsum(y)[last_of_group]
    fp = (last_of_group + 1) - tp
    fpr = np.r_[0.0, fp / (len(y) - y.sum())]
    tpr = np.r_[0.0, tp / y.sum()]
    return fpr, tpr


def pauc(
    scores: Sequence[float],
    labels: Sequence[int],
    specificity_range: Tuple[float, float] = (0.90, 1.00),
) -> float:
    """Un-normalized area under the ROC curve within a specificity interval.

    The curve is linearly interpolated between thresholds (tied scores give
    diagonal segments) and clipped exactly at the interval end points.

    Raises:
        ValueError: If the interval is empty
    """
    lo, hi = specificity_range
    if not 0 <= lo < hi <= 1:
        raise ValueError(f"Empty or invalid specificity range {specificity_range}")
    fpr, tpr = roc_curve(scores, labels)
    a, b = 1.0 - hi, 1.0 - lo

    x0, x1 = fpr[:-1], fpr[1:]
    y0, y1 = tpr[:-1], tpr[1:]
    width = x1 - x0
    left = np.clip(x0, a, b)
    right = np.clip(x1, a, b)
    sloped = width > 0
    slope = np.zeros_like(width)
    slope[sloped] = (y1[sloped] - y0[sloped]) / width[sloped]
    y_left = y0 + slope * (left - x0)
    y_right = y0 + slope * (right - x0)
    return float(np.sum((right - left) * (y_left + y_right) / 2.0))


def pauc_mcclish(
    partial_auc: float,
    specificity_range: Tuple[float, float] = (0.90, 1.00),
) -> float:
    """Standardizes a partial AUC to [0.5, 1] for non-degenerate classifiers"""
    lo, hi = specificity_range
    a, b = 1.0 - hi, 1.0 - lo
    min_area = (b ** 2 - a ** 2) / 2.0
    max_area = b - a
    return 0.5 * (1.0 + (partial_auc - min_area) / (max_area - min_area))


def delong_ci(
    scores: Sequence[float],
    labels: Sequence[int],
    level: float = 0.95,
    specificity_range: Optional[Tuple[float, float]] = (0.90, 1.00),
) -> RocResult:
    """AUC with its DeLong variance and a normal interval clipped to [0, 1]"""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    aucs, cov = delong_covariance([scores], labels)
    auc = float(aucs[0])
    variance = max(float(cov[0, 0]), 0.0)
    half = norm.ppf((1 + level) / 2.0) * math.sqrt(variance)
    y = np.asarray(labels, dtype=int)

    partial = mcclish = None
    if specificity_range is not None:
        partial = pauc(scores, labels, specificity_range)
        mcclish = pauc_mcclish(partial, specificity_range)
    return RocResult(
        auc=auc,
        delong_variance=variance,
        ci95=(max(0.0, auc - half), min(1.0, auc + half)),
        pauc_spec90=partial,
        pauc_mcclish=mcclish,
        n_pos=int(y.sum()),
        n_neg=int(len(y) - y.sum()),
    )


def delong_test(
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    labels: Sequence[int],
) -> DelongTestResult:
    """Two sided test of the AUC difference of two paired classifiers.

    Raises:
        ShapeMismatchError: If the score vectors differ in length
    """
    if len(scores_a) != len(scores_b):
        raise ShapeMismatchError(
            "Paired score vectors differ in length: "
            f"{len(scores_a)} != {len(scores_b)}"
        )
    aucs, cov = delong_covariance([scores_a, scores_b], labels)
    delta = float(aucs[0] - aucs[1])
    variance = float(cov[0, 0] + cov[1, 1] - 2 * cov[0, 1])

    if variance <= 0:
        z = 0.0 if delta == 0 else math.copysign(math.inf, delta)
        p_value = 1.0 if delta == 0 else 0.0
    else:
        z = delta / math.sqrt(variance)
        p_value = min(1.0, float(2 * norm.sf(abs(z))))

    auc_b = float(aucs[1])
    return DelongTestResult(
        auc_a=float(aucs[0]),
        auc_b=auc_b,
        delta_auc=delta,
        delta_auc_percent=100.0 * delta / auc_b if auc_b > 0 else math.nan,
        z=z,
        p_value=p_value,
        sig_code=sig_code(p_value),
    )
