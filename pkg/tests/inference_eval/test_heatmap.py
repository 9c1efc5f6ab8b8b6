import numpy as np
import pytest

from PIL import Image

from cofcn.core.errors import ShapeMismatchError
from cofcn.core.model import PatchRef
from cofcn.inference_eval.config import (
    PatchPrediction,
    SlidePrediction,
)
from cofcn.inference_eval.heatmap import (
    heatmap_layer,
    probability_colors,
    render_heatmap,
    save_overlay,
)


REF = PatchRef("012/3", 1, 0)


def _prediction(cell: np.ndarray, origin=(128, 0)) -> SlidePrediction:
    return SlidePrediction(
        slide_id="012/3",
        model_name="unet",
        per_patch=[
            PatchPrediction(
                patch_ref=REF,
                origin_px=origin,
                eval_label=1,
                lesion_prob=float(cell.min()),
            )
        ],
        heatmap={REF: cell},
    )


def test_colors_run_from_green_to_red_above_threshold():
    colors = probability_colors(np.array([0.5, 0.75, 1.0]), threshold=0.75)

    assert colors.dtype == np.uint8
    assert colors[:, 3].tolist() == [0, 255, 255]
    assert colors[1, :3].tolist() == [0, 255, 0]
    assert colors[2, :3].tolist() == [255, 0, 0]


def test_colors_hue_is_monotone():
    colors = probability_colors(np.linspace(0.75, 1.0, 11))
    red = colors[:, 0].astype(int)
    green = colors[:, 1].astype(int)

    assert np.all(np.diff(red) >= 0)
    assert np.all(np.diff(green) <= 0)


@pytest.mark.parametrize(
    "threshold",
    [pytest.param(1.0, id="one"), pytest.param(-0.1, id="negative")],
)
def test_invalid_threshold(threshold):
    with pytest.raises(ValueError):
        probability_colors(np.zeros(3), threshold)


def test_layer_paints_only_the_central_window():
    layer = heatmap_layer(_prediction(np.ones((64, 64))), (256, 128))

    assert layer.shape == (128, 256, 4)
    painted = layer[..., 3] > 0
    assert painted.sum() == 64 * 64
    assert painted[32:96, 160:224].all()


def test_layer_rejects_cells_outside_the_slide():
    with pytest.raises(ShapeMismatchError):
        heatmap_layer(_prediction(np.ones((64, 64)), origin=(256, 0)), (256, 128))
    with pytest.raises(ShapeMismatchError):
        heatmap_layer(_prediction(np.ones((32, 32))), (256, 128))


def test_empty_prediction_leaves_background_unchanged():
    background = np.full((128, 256, 3), 200, dtype=np.uint8)
    empty = SlidePrediction(slide_id="012/3", model_name="unet")

    assert np.array_equal(render_heatmap(empty, background), background)


def test_overlay_blends_with_opacity():
    background = np.full((128, 256, 3), 200, dtype=np.uint8)
    cell = np.zeros((64, 64))
    cell[0, 0] = 1.0
    opaque = render_heatmap(_prediction(cell), background, opacity=1.0)

    assert opaque[32, 160].tolist() == [255, 0, 0]
    assert opaque[33, 161].tolist() == [200, 200, 200]

    blended = render_heatmap(_prediction(cell), background, opacity=0.6)
    assert blended[32, 160, 0] > 200
    assert blended[32, 160, 1] < 200


def test_overlay_needs_an_rgb_background():
    with pytest.raises(ShapeMismatchError):
        render_heatmap(_prediction(np.ones((64, 64))), np.zeros((128, 256)))


def test_save_overlay(tmp_path):
    image = np.zeros((8, 8, 3), dtype=np.uint8)
    image[2, 3] = (255, 0, 0)
    path = tmp_path / "render" / "unet" / "012_3.png"
    save_overlay(path, image)

    with Image.open(path) as saved:
        assert np.array_equal(np.asarray(saved), image)
