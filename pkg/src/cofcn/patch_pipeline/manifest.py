"""Patch extraction per slide, manifest I/O and cached patch loading."""

import json

from pathlib import Path
from typing import (
    Dict,
    List,
    Optional,
    Sequence,
)

import numpy as np

from PIL import Image
from structlog.stdlib import BoundLogger

from ..core.errors import MissingArtifactError
from ..core.logging import get_logger
from ..core.model import PatchLabel
from ..core.util import (
    derive_seed,
    read_jsonl,
    read_models,
)
from .balance import balance_manifest
from .config import (
    PATCH_SIZE,
    LabelingRule,
    PatchManifest,
    PatchRecord,
    PipelineConfig,
    SetRole,
    SlideRef,
    TissueFilterConfig,
)
from .labeling import label_patch
from .synthetic import CATALOG_NAME
from .tiling import (
    grid_patches,
    tissue_filter,
)


__all__ = [
    "PatchStore",
    "extract_patches",
    "prepare_manifests",
    "write_manifest",
    "read_manifest",
    "read_catalog",
    "RULE_BY_ROLE",
]

RULE_BY_ROLE: Dict[SetRole, LabelingRule] = {
    SetRole.SUPPORT: LabelingRule.TRAIN_MAJORITY,
    SetRole.QUERY: LabelingRule.TRAIN_MAJORITY,
    SetRole.TEST: LabelingRule.EVAL_ANY_PIXEL,
}


class PatchStore:
    """Loads slide rasters once and serves patches and masks from them."""

    def __init__(self):
        self._images: Dict[str, np.ndarray] = {}
        self._masks: Dict[str, np.ndarray] = {}

    def image(self, path: str) -> np.ndarray:
        """The slide raster as `(H, W, 3)` float32 in [0, 1]"""
        if path not in self._images:
            with Image.open(path) as img:
                rgb = np.asarray(img.convert("RGB"), dtype=np.float32)
            self._images[path] = rgb / 255.0
        return self._images[path]

    def mask(self, path: str) -> np.ndarray:
        """The binary lesion mask as `(H, W)` uint8 in {0, 1}"""
        if path not in self._masks:
            with Image.open(path) as img:
                self._masks[path] = (np.asarray(img.convert("L")) > 0).astype(
                    np.uint8
                )
        return self._masks[path]

    def patch(self, record: PatchRecord) -> np.ndarray:
        """The `(128, 128, 3)` RGB patch of a record"""
        x, y = record.origin_px
        return self.image(record.image_path)[y : y + PATCH_SIZE, x : x + PATCH_SIZE]

    def patch_chw(self, record: PatchRecord) -> np.ndarray:
        """The `(3, 128, 128)` channel first patch of a record"""
        return np.ascontiguousarray(self.patch(record).transpose(2, 0, 1))

    def patch_mask(self, record: PatchRecord) -> np.ndarray:
        """The `(128, 128)` lesion mask of a record (zeros if not annotated)"""
        if record.mask_path is None:
            return np.zeros((PATCH_SIZE, PATCH_SIZE), dtype=np.uint8)
        x, y = record.origin_px
        return self.mask(record.mask_path)[y : y + PATCH_SIZE, x : x + PATCH_SIZE]


def extract_patches(
    slide: SlideRef,
    rule: LabelingRule,
    store: PatchStore,
    tissue: TissueFilterConfig = TissueFilterConfig(),
) -> List[PatchRecord]:
    """Tiles a slide, drops background tiles and labels the rest.

    Tissue filtering happens before labeling.

    Args:
        slide: The slide to process
        rule: The labeling rule
        store: The raster store
        tissue: The tissue filter parameters

    Returns:
        Patch records in `(grid_y, grid_x)` order
    """
    image = store.image(slide.image_path)
    mask = store.mask(slide.mask_path) if slide.mask_path is not None else None
    height, width = image.shape[:2]

    records: List[PatchRecord] = []
    for tile in grid_patches((width, height)):
        x, y = tile.origin_px
        patch = image[y : y + PATCH_SIZE, x : x + PATCH_SIZE]
        if not tissue_filter(patch, tissue.blur_sigma, tissue.threshold):
            continue

        if mask is not None:
            label, fraction = label_patch(
                mask[y : y + PATCH_SIZE, x : x + PATCH_SIZE], rule
            )
        else:
            label, fraction = PatchLabel.NON_LESION, 0.0

        records.append(
            PatchRecord(
                slide_id=slide.slide_id,
                grid_x=tile.grid_x,
                grid_y=tile.grid_y,
                origin_px=tile.origin_px,
                label=label,
                central_lesion_fraction=fraction,
                center_id=slide.center_id,
                set_role=slide.set_role,
                image_path=slide.image_path,
                mask_path=slide.mask_path,
            )
        )
    return records


def prepare_manifests(
    slides: Sequence[SlideRef],
    config: PipelineConfig,
    store: Optional[PatchStore] = None,
    log: BoundLogger = None,
) -> Dict[SetRole, PatchManifest]:
    """Builds one balanced manifest per set role.

    Support and query patches are labelled with the 50% central rule, test
    patches with the any-pixel rule unless `config.labeling` forces one rule
    for all sets; non-lesion patches are then dropped
    according to the configured per-role fractions.
    """
    log = log or get_logger()
    store = store or PatchStore()

    manifests: Dict[SetRole, PatchManifest] = {}
    for role in SetRole:
        rule = config.labeling or RULE_BY_ROLE[role]
        records: List[PatchRecord] = []
        for slide in slides:
            if slide.set_role != role:
                continue
            slide_records = extract_patches(slide, rule, store, config.tissue)
            log.info(
                "Extracted patches",
                slide_id=slide.slide_id,
                set_role=role.value,
                n_patches=len(slide_records),
            )
            records.extend(slide_records)

        drop_fraction = getattr(config.drop_fractions, role.value)
        manifest = balance_manifest(
            PatchManifest(records=records, labeling_rule=rule),
            drop_fraction=drop_fraction,
            seed=derive_seed(config.seed, role.value),
        )
        log.info(
            "Balanced manifest",
            set_role=role.value,
            n_records=len(manifest.records),
            n_lesion=manifest.n_lesion,
            drop_fraction=drop_fraction,
        )
        manifests[role] = manifest
    return manifests


def write_manifest(path: Path, manifest: PatchManifest):
    """Writes a manifest as a header line followed by one record per line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    header = manifest.dict(exclude={"records"})
    header["labeling_rule"] = manifest.labeling_rule.value
    with open(path, "w", encoding="utf-8") as out:
        out.write(json.dumps(header))
        out.write("\n")
        for record in manifest.records:
            out.write(record.json())
            out.write("\n")


def read_manifest(path: Path) -> PatchManifest:
    if not path.exists():
        raise MissingArtifactError(f"Manifest {path} does not exist")
    rows = list(read_jsonl(path))
    if not rows:
        raise ValueError(f"Manifest {path} has no header line")
    return PatchManifest(records=rows[1:], **rows[0])


def read_catalog(slides_dir: Path) -> List[SlideRef]:
    path = slides_dir / CATALOG_NAME
    if not path.exists():
        raise MissingArtifactError(
            f"Slide catalog {path} does not exist", stage="synthesize"
        )
    return read_models(path, SlideRef)
