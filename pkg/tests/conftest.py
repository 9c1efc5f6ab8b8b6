from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from PIL import Image

from cofcn.cofcn_model.config import CoFcnConfig
from cofcn.core.model import PatchLabel
from cofcn.patch_pipeline.config import (
    LesionClass,
    PatchRecord,
    PnStage,
    SetRole,
    SlideRef,
)
from cofcn.patch_pipeline.manifest import PatchStore


TISSUE_RGB = (230, 158, 204)
BACKGROUND_RGB = (245, 245, 245)


@pytest.fixture
def make_record() -> Callable[..., PatchRecord]:
    """Factory for in-memory patch records of a 50% central lesion rule manifest"""

    def factory(
        slide_id: str = "001/0",
        grid_x: int = 0,
        grid_y: int = 0,
        label: PatchLabel = PatchLabel.NON_LESION,
        center_id: int = 0,
        set_role: SetRole = SetRole.SUPPORT,
        image_path: str = "unused.png",
    ) -> PatchRecord:
        return PatchRecord(
            slide_id=slide_id,
            grid_x=grid_x,
            grid_y=grid_y,
            origin_px=(grid_x * 128, grid_y * 128),
            label=label,
            central_lesion_fraction=1.0 if label == PatchLabel.LESION else 0.0,
            center_id=center_id,
            set_role=set_role,
            image_path=image_path,
        )

    return factory


@pytest.fixture
def slide_on_disk(tmp_path: Path) -> SlideRef:
    """A 256x256 px slide with tissue in its left tile column.

    Tile (0, 0) is lesion everywhere, tile (0, 1) has a single lesion pixel
    in its central window and the right column is blank background.
    """
    rgb = np.empty((256, 256, 3), dtype=np.uint8)
    rgb[:, :] = BACKGROUND_RGB
    rgb[:, :128] = TISSUE_RGB
    mask = np.zeros((256, 256), dtype=np.uint8)
    mask[:128, :128] = 255
    mask[128 + 40, 40] = 255

    image_path = tmp_path / "slide.png"
    mask_path = tmp_path / "slide_mask.png"
    Image.fromarray(rgb, mode="RGB").save(image_path)
    Image.fromarray(mask, mode="L").save(mask_path)
    return SlideRef(
        slide_id="007/1",
        center_id=3,
        patient_id="007",
        node_id="1",
        lesion_class=LesionClass.MICRO,
        pn_stage=PnStage.PN1MI,
        set_role=SetRole.TEST,
        image_path=str(image_path),
        mask_path=str(mask_path),
    )


@pytest.fixture
def store() -> PatchStore:
    return PatchStore()


@pytest.fixture
def tiny_architecture() -> Callable[[int], CoFcnConfig]:
    def factory(k: int = 2) -> CoFcnConfig:
        return CoFcnConfig(
            k_shots=k,
            encoder_channels=(4, 4, 8, 8),
            decoder_channels=(4, 4, 4, 8),
        )

    return factory
