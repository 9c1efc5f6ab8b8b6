"""Grid tiling of slide rasters and the saturation based tissue filter."""

from typing import (
    List,
    NamedTuple,
    Tuple,
)

import numpy as np

from matplotlib.colors import rgb_to_hsv
from scipy.ndimage import gaussian_filter

from ..core.errors import (
    EmptyGridError,
    NonFiniteInputError,
    ShapeMismatchError,
)
from .config import PATCH_SIZE


__all__ = ["GridTile", "grid_patches", "saturation", "tissue_filter"]


class GridTile(NamedTuple):
    grid_x: int
    grid_y: int
    origin_px: Tuple[int, int]


def grid_patches(
    image_dims: Tuple[int, int],
    patch_size: int = PATCH_SIZE,
) -> List[GridTile]:
    """Partitions an image into non-overlapping square tiles.

    Partial tiles at the right and bottom edges are dropped.

    Args:
        image_dims: The image `(width, height)` in pixels
        patch_size: The tile edge length

    Raises:
        EmptyGridError: If the image cannot hold a single tile

    Returns:
        The tiles in row major `(grid_y, grid_x)` order
    """
    width, height = image_dims
    if width < patch_size or height < patch_size:
        raise EmptyGridError(
            f"Image of {width}x{height} px is smaller than a {patch_size} px patch"
        )
    return [
        GridTile(gx, gy, (gx * patch_size, gy * patch_size))
        for gy in range(height // patch_size)
        for gx in range(width // patch_size)
    ]


def saturation(patch_rgb: np.ndarray) -> np.ndarray:
    """HSV saturation channel of an `(H, W, 3)` RGB raster with values in [0, 1]"""
    if patch_rgb.ndim != 3 or patch_rgb.shape[2] != 3:
        raise ShapeMismatchError(
            f"Expected an (H, W, 3) RGB raster, got {patch_rgb.shape}"
        )
    if not np.all(np.isfinite(patch_rgb)):
        raise NonFiniteInputError("RGB raster contains non-finite values")
    return rgb_to_hsv(np.clip(patch_rgb, 0.0, 1.0))[..., 1]


def tissue_filter(
    patch_rgb: np.ndarray,
    blur_sigma: float = 2.0,
    threshold: float = 0.10,
) -> bool:
    """Decides whether a patch contains tissue.

    A patch is kept if the maximum of its Gaussian blurred saturation channel
    reaches `threshold` (a fraction of full saturation).

    Args:
        patch_rgb: `(H, W, 3)` RGB raster with values in [0, 1]
        blur_sigma: The blur standard deviation in pixels
        threshold: Minimum saturation maximum

    Raises:
        NonFiniteInputError: If the raster contains NaN or infinite values

    Returns:
        `True` if the patch should be kept
    """
    blurred = gaussian_filter(saturation(patch_rgb), sigma=blur_sigma)
    return bool(blurred.max() >= threshold)
