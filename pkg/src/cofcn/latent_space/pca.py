"""Principal component analysis of latent vectors."""

from typing import (
    Sequence,
    Union,
)

import numpy as np

from ..core.errors import (
    NonFiniteInputError,
    RankDeficientError,
    ShapeMismatchError,
)
from .config import (
    LatentVector,
    PcaModel,
)


__all__ = ["fit_pca", "project", "reconstruct"]

VectorLike = Union[LatentVector, Sequence[float], np.ndarray]


def _as_matrix(vectors: Sequence[VectorLike]) -> np.ndarray:
    rows = [v.values if isinstance(v, LatentVector) else v for v in vectors]
    data = np.asarray(rows, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeMismatchError(f"Expected a list of vectors, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise NonFiniteInputError("PCA input contains non-finite values")
    return data


def fit_pca(vectors: Sequence[VectorLike], dims: int = 3) -> PcaModel:
    """Fits a `dims` component PCA on the given vectors.

    Components are the right singular vectors of the centered data, each
    oriented so that its largest magnitude entry is positive.

    Raises:
        RankDeficientError: If the centered data spans fewer than `dims` dimensions
    """
    data = _as_matrix(vectors)
    n, d = data.shape
    if dims < 1 or dims > d:
        raise ValueError(f"dims must be in 1..{d}, got {dims}")

    mean = data.mean(axis=0)
    centered = data - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(n, d) * np.finfo(np.float64).eps * (singular[0] if singular.size else 0)
    rank = int(np.sum(singular > tol))
    if rank < dims:
        raise RankDeficientError(rank, dims)

    components = vt[:dims]
    signs = np.sign(components[np.arange(dims), np.abs(components).argmax(axis=1)])
    components = components * signs[:, None]
    variance = singular[:dims] ** 2 / max(n - 1, 1)

    return PcaModel(
        mean=mean.tolist(),
        components=components.tolist(),
        explained_variance=variance.tolist(),
    )


def project(v: VectorLike, model: PcaModel) -> np.ndarray:
    values = v.values if isinstance(v, LatentVector) else v
    x = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFiniteInputError("Cannot project a non-finite vector")
    return np.asarray(model.components) @ (x - np.asarray(model.mean))


def reconstruct(z: Sequence[float], model: PcaModel) -> np.ndarray:
    """Maps projected coordinates back into the latent space"""
    return np.asarray(model.mean) + np.asarray(z, dtype=np.float64) @ np.asarray(
        model.components
    )
