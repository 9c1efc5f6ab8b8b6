"""Convolutional autoencoder producing an 8 channel latent map per patch."""

from typing import (
    List,
    Tuple,
)

import numpy as np
import torch

from torch import nn

from ..core.errors import ShapeMismatchError
from ..patch_pipeline.config import PATCH_SIZE
from .config import LATENT_CHANNELS


__all__ = ["ConvAutoencoder", "autoencoder_forward", "ENCODER_CHANNELS"]

ENCODER_CHANNELS: Tuple[int, ...] = (16, 16, 16, LATENT_CHANNELS)


def _down(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel_size=3, stride=2, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


def _up(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
        nn.Conv2d(cin, cout, kernel_size=3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class ConvAutoencoder(nn.Module):
    """Four stride-2 encoder stages and a mirrored bilinear decoder.

    A 3x128x128 patch is encoded into an 8x8x8 latent map.
    """

    def __init__(self, in_channels: int = 3):
        super().__init__()
        widths = (in_channels,) + ENCODER_CHANNELS
        self.encoder = nn.Sequential(
            *[_down(widths[i], widths[i + 1]) for i in range(len(ENCODER_CHANNELS))]
        )

        decoder: List[nn.Module] = []
        mirrored = widths[::-1]
        for i in range(len(mirrored) - 2):
            decoder.append(_up(mirrored[i], mirrored[i + 1]))
        decoder.append(
            nn.Sequential(
                nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
                nn.Conv2d(mirrored[-2], in_channels, kernel_size=3, padding=1),
                nn.Sigmoid(),
            )
        )
        self.decoder = nn.Sequential(*decoder)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        if x.dim() != 4 or tuple(x.shape[1:]) != (3, PATCH_SIZE, PATCH_SIZE):
            raise ShapeMismatchError(
                f"Expected (N, 3, {PATCH_SIZE}, {PATCH_SIZE}) input, "
                f"got {tuple(x.shape)}"
            )
        latent = self.encoder(x)
        return self.decoder(latent), latent


def autoencoder_forward(
    model: ConvAutoencoder,
    patch: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Runs a single `(3, 128, 128)` patch through the model in inference mode.

    Returns:
        The `(3, 128, 128)` reconstruction and the `(8, h, w)` latent map
    """
    if patch.shape != (3, PATCH_SIZE, PATCH_SIZE):
        raise ShapeMismatchError(
            f"Expected a (3, {PATCH_SIZE}, {PATCH_SIZE}) patch, got {patch.shape}"
        )
    model.eval()
    with torch.no_grad():
        recon, latent = model(torch.from_numpy(np.asarray(patch, np.float32))[None])
    return recon[0].numpy(), latent[0].numpy()
