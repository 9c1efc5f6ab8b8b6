"""Lesion probability heatmaps over slide rasters."""

from pathlib import Path
from typing import Tuple

import numpy as np

from matplotlib.colors import hsv_to_rgb
from PIL import Image

from ..core.errors import ShapeMismatchError
from ..patch_pipeline.config import (
    CENTRAL_START,
    CENTRAL_STOP,
)
from .config import SlidePrediction


__all__ = ["probability_colors", "heatmap_layer", "render_heatmap", "save_overlay"]

GREEN_HUE = 1.0 / 3.0
CENTRAL_SIZE = CENTRAL_STOP - CENTRAL_START


def probability_colors(prob: np.ndarray, threshold: float = 0.75) -> np.ndarray:
    """RGBA uint8 colours: transparent below `threshold`, green to red above.

    The hue moves linearly from green at `threshold` to red at 1.0.
    """
    if not 0 <= threshold < 1:
        raise ValueError("threshold must be in [0, 1)")
    p = np.asarray(prob, dtype=np.float64)
    t = np.clip((p - threshold) / (1.0 - threshold), 0.0, 1.0)
    hsv = np.stack([GREEN_HUE * (1.0 - t), np.ones_like(t), np.ones_like(t)], axis=-1)
    rgb = np.round(hsv_to_rgb(hsv) * 255).astype(np.uint8)
    alpha = np.where(p >= threshold, 255, 0).astype(np.uint8)
    return np.concatenate([rgb, alpha[..., None]], axis=-1)


def heatmap_layer(
    prediction: SlidePrediction,
    dims: Tuple[int, int],
    threshold: float = 0.75,
) -> np.ndarray:
    """Paints the central window probabilities of every patch onto a slide sized layer.

    Args:
        prediction: The slide prediction with its central window heatmap
        dims: The slide `(width, height)`
        threshold: Probabilities below this stay transparent

    Raises:
        ShapeMismatchError: If a heatmap cell does not fit the slide grid

    Returns:
        `(H, W, 4)` uint8 RGBA layer, transparent outside scored tissue
    """
    width, height = dims
    layer = np.zeros((height, width, 4), dtype=np.uint8)
    origins = {p.patch_ref: p.origin_px for p in prediction.per_patch}
    for ref, cell in prediction.heatmap.items():
        if ref not in origins:
            raise ShapeMismatchError(f"Heatmap cell {ref} has no scored patch")
        if cell.shape != (CENTRAL_SIZE, CENTRAL_SIZE):
            raise ShapeMismatchError(
                f"Heatmap cell {ref} has shape {cell.shape}, "
                f"expected {(CENTRAL_SIZE, CENTRAL_SIZE)}"
            )
        x = origins[ref][0] + CENTRAL_START
        y = origins[ref][1] + CENTRAL_START
        if x < 0 or y < 0 or x + CENTRAL_SIZE > width or y + CENTRAL_SIZE > height:
            raise ShapeMismatchError(
                f"Heatmap cell {ref} at ({x}, {y}) lies outside the "
                f"{width}x{height} slide"
            )
        layer[y : y + CENTRAL_SIZE, x : x + CENTRAL_SIZE] = probability_colors(
            cell, threshold
        )
    return layer


def render_heatmap(
    prediction: SlidePrediction,
    background: np.ndarray,
    threshold: float = 0.75,
    opacity: float = 0.6,
) -> np.ndarray:
    """Composites the heatmap layer over an `(H, W, 3)` uint8 slide raster"""
    if background.ndim != 3 or background.shape[2] != 3:
        raise ShapeMismatchError(
            f"Expected an (H, W, 3) background, got {background.shape}"
        )
    height, width = background.shape[:2]
    layer = heatmap_layer(prediction, (width, height), threshold)
    layer[..., 3] = np.round(layer[..., 3] * opacity).astype(np.uint8)

    base = Image.fromarray(np.asarray(background, dtype=np.uint8), mode="RGB")
    overlay = Image.fromarray(layer, mode="RGBA")
    composite = Image.alpha_composite(base.convert("RGBA"), overlay)
    return np.asarray(composite.convert("RGB"))


def save_overlay(path: Path, image: np.ndarray):
    """Saves an RGB or RGBA raster losslessly as PNG"""
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(path, format="PNG")
