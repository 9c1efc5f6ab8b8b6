"""Unsupervised patch embedding with per center autoencoders and PCA."""

from .autoencoder import (
    ConvAutoencoder,
    autoencoder_forward,
)
from .config import (
    AutoencoderConfig,
    LatentVector,
    PcaModel,
)
from .embed import (
    embed,
    embed_batch,
    spatial_average,
)
from .pca import (
    fit_pca,
    project,
    reconstruct,
)
from .train import (
    AutoencoderCheckpoint,
    fit_autoencoder,
    train_autoencoder,
)


__all__ = [
    "AutoencoderCheckpoint",
    "AutoencoderConfig",
    "ConvAutoencoder",
    "LatentVector",
    "PcaModel",
    "autoencoder_forward",
    "embed",
    "embed_batch",
    "fit_autoencoder",
    "fit_pca",
    "project",
    "reconstruct",
    "spatial_average",
    "train_autoencoder",
]
