"""Spatially averaged latent embeddings."""

from typing import (
    List,
    Optional,
    Sequence,
)

import numpy as np
import torch

from ..core.errors import (
    MissingArtifactError,
    NonFiniteInputError,
    ShapeMismatchError,
)
from ..core.model import PatchRef
from .autoencoder import ConvAutoencoder
from .config import (
    LATENT_CHANNELS,
    LatentVector,
)
from .train import AutoencoderCheckpoint


__all__ = ["spatial_average", "embed", "embed_batch"]


def spatial_average(latent: np.ndarray) -> np.ndarray:
    """Channel means of a `(C, h, w)` latent map"""
    if latent.ndim != 3:
        raise ShapeMismatchError(f"Expected a (C, h, w) latent map, got {latent.shape}")
    return latent.reshape(latent.shape[0], -1).mean(axis=1)


def _to_vector(values: np.ndarray, ref: PatchRef) -> LatentVector:
    if not np.all(np.isfinite(values)):
        raise NonFiniteInputError(f"Embedding of {ref} is not finite")
    return LatentVector(values=[float(v) for v in values], patch_ref=ref)


def embed(
    patch: np.ndarray,
    checkpoint: Optional[AutoencoderCheckpoint],
    center_id: int,
    patch_ref: PatchRef,
) -> LatentVector:
    """Embeds one `(3, 128, 128)` patch with the autoencoder of its center.

    Raises:
        MissingArtifactError: If no checkpoint is given
        CheckpointMismatchError: If the checkpoint belongs to another center
    """
    return embed_batch([patch], checkpoint, center_id, [patch_ref])[0]


def embed_batch(
    patches: Sequence[np.ndarray],
    checkpoint: Optional[AutoencoderCheckpoint],
    center_id: int,
    refs: Sequence[PatchRef],
    model: Optional[ConvAutoencoder] = None,
    batch_size: int = 64,
) -> List[LatentVector]:
    """Embeds many patches, optionally reusing an already built model."""
    if checkpoint is None:
        raise MissingArtifactError(
            f"No autoencoder weights for center {center_id}", stage="train-ae"
        )
    checkpoint.check_center(center_id)
    if len(patches) != len(refs):
        raise ShapeMismatchError("Need exactly one patch reference per patch")

    model = model or checkpoint.build_model()
    model.eval()
    vectors: List[LatentVector] = []
    with torch.no_grad():
        for start in range(0, len(patches), batch_size):
            batch = np.stack(patches[start : start + batch_size]).astype(np.float32)
            _, latent = model(torch.from_numpy(batch))
            means = latent.mean(dim=(2, 3)).numpy().astype(np.float64)
            assert means.shape[1] == LATENT_CHANNELS
            for ref, values in zip(refs[start : start + batch_size], means):
                vectors.append(_to_vector(values, ref))
    return vectors
