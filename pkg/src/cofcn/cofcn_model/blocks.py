"""Encoder and decoder building blocks."""

from typing import (
    Sequence,
    Tuple,
)

import torch

from torch import nn
from torch.nn import functional as F

from ..core.errors import ShapeMismatchError


__all__ = ["conv_bn_relu", "EncoderBlock", "DecoderBlock", "check_shape"]


def conv_bn_relu(in_channels: int, out_channels: int) -> nn.Sequential:
    """3x3 same padding convolution followed by batch norm and ReLU"""
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=1, padding=1),
        nn.BatchNorm2d(out_channels),
        nn.ReLU(inplace=True),
    )


def check_shape(name: str, x: torch.Tensor, expected: Sequence[int]):
    """Raises if `x` does not have shape `(batch, *expected)`"""
    if x.dim() != len(expected) + 1 or tuple(x.shape[1:]) != tuple(expected):
        raise ShapeMismatchError(
            f"{name}: expected (N, {', '.join(map(str, expected))}), "
            f"got {tuple(x.shape)}"
        )


class EncoderBlock(nn.Module):
    """Convolution block with a 2x2 max-pooled output path."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.conv = conv_bn_relu(in_channels, out_channels)
        self.pool = nn.MaxPool2d(kernel_size=2, stride=2)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ShapeMismatchError(
                f"Encoder block expects {self.in_channels} input channels, "
                f"got shape {tuple(x.shape)}"
            )
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise ShapeMismatchError(
                f"Encoder block needs even spatial dims, got {tuple(x.shape[2:])}"
            )
        return self.conv(x)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        features = self.features(x)
        return features, self.pool(features)


class DecoderBlock(nn.Module):
    """Bilinear x2 upsampling, skip concatenation and a convolution block."""

    def __init__(self, in_channels: int, skip_channels: int, out_channels: int):
        super().__init__()
        self.in_channels = in_channels
        self.skip_channels = skip_channels
        self.out_channels = out_channels
        self.conv = conv_bn_relu(in_channels + skip_channels, out_channels)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ShapeMismatchError(
                f"Decoder block expects {self.in_channels} input channels, "
                f"got shape {tuple(x.shape)}"
            )
        expected = (
            x.shape[0],
            self.skip_channels,
            2 * x.shape[2],
            2 * x.shape[3],
        )
        if tuple(skip.shape) != expected:
            raise ShapeMismatchError(
                f"Skip connection must have shape {expected}, got {tuple(skip.shape)}"
            )
        up = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
        return self.conv(torch.cat([up, skip], dim=1))
