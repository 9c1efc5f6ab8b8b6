"""Composite segmentation and conditioning pretext loss."""

from typing import Union

import torch

from torch.nn import functional as F

from ..core.errors import ShapeMismatchError


__all__ = ["BCE_EPSILON", "weighted_bce", "pretext_loss", "total_loss"]

BCE_EPSILON = 1e-7

Target = Union[float, torch.Tensor]


def weighted_bce(
    pred: torch.Tensor,
    target: torch.Tensor,
    w_l: float,
    eps: float = BCE_EPSILON,
) -> torch.Tensor:
    """Pixel mean of `-(w_l * y * log p + (1 - y) * log(1 - p))`.

    Predictions are clamped to `[eps, 1 - eps]`.
    """
    if pred.shape != target.shape:
        raise ShapeMismatchError(
            f"Prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ"
        )
    p = pred.clamp(eps, 1.0 - eps)
    y = target.to(p.dtype)
    return -(w_l * y * torch.log(p) + (1.0 - y) * torch.log1p(-p)).mean()


def _mean_logit(cond_map: torch.Tensor) -> torch.Tensor:
    if cond_map.dim() == 3:
        cond_map = cond_map[None]
    if cond_map.dim() != 4:
        raise ShapeMismatchError(
            f"Expected a (N, k, H, W) conditioning map, got {tuple(cond_map.shape)}"
        )
    shot_means = torch.sort(cond_map.mean(dim=(2, 3)), dim=1).values
    return shot_means.mean(dim=1)


def pretext_loss(cond_map: torch.Tensor, pi: Target) -> torch.Tensor:
    """BCE between the sigmoid of the mean conditioning logit and the prevalence.

    Raises:
        ValueError: If a prevalence target is outside [0, 1]
    """
    logit = _mean_logit(cond_map)
    target = torch.as_tensor(pi, dtype=logit.dtype, device=logit.device)
    if not bool(torch.all(torch.isfinite(cond_map))):
        raise ValueError("Conditioning map must be finite")
    if bool(torch.any((target < 0) | (target > 1))):
        raise ValueError(f"pi must be in [0, 1], got {pi}")
    return F.binary_cross_entropy_with_logits(logit, target.expand_as(logit))


def total_loss(
    seg_prob: torch.Tensor,
    target: torch.Tensor,
    cond_map: torch.Tensor,
    pi: Target,
    w_l: float,
    w: float,
) -> torch.Tensor:
    return weighted_bce(seg_prob, target, w_l) + w * pretext_loss(cond_map, pi)
