"""Synthetic H&E-like slides with known lesion masks for desk scale runs."""

from pathlib import Path
from typing import (
    Dict,
    List,
    Sequence,
    Tuple,
)

import numpy as np

from faker import Faker
from PIL import Image
from scipy.ndimage import gaussian_filter
from structlog.stdlib import BoundLogger

from ..core.logging import get_logger
from ..core.util import (
    derive_seed,
    write_models,
)
from .config import (
    PATCH_SIZE,
    LesionClass,
    LesionSpec,
    PnStage,
    SetRole,
    SlideRef,
    SyntheticConfig,
)


__all__ = ["generate_synthetic_slide", "synthesize_corpus", "CATALOG_NAME"]

CATALOG_NAME = "slides.jsonl"

_BACKGROUND = np.array([0.96, 0.96, 0.96])
_TISSUE = np.array([0.90, 0.62, 0.80])
_LESION = np.array([0.74, 0.46, 0.76])
_NUCLEUS = np.array([0.33, 0.18, 0.52])

_MAX_PLACEMENT_TRIES = 2000

_STAGE_BY_CLASS: Dict[LesionClass, PnStage] = {
    LesionClass.NEGATIVE: PnStage.PN0,
    LesionClass.ITC: PnStage.PN0_I,
    LesionClass.MICRO: PnStage.PN1MI,
    LesionClass.MACRO: PnStage.PN1,
}


def _nuclei(rng: np.random.Generator, shape: Tuple[int, int], density: float):
    seeds = (rng.random(shape) < density).astype(float)
    blurred = gaussian_filter(seeds, sigma=1.2)
    peak = blurred.max()
    return blurred / peak if peak > 0 else blurred


def _place_lesions(
    rng: np.random.Generator,
    width: int,
    height: int,
    spec: LesionSpec,
) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    mask = np.zeros((height, width), dtype=bool)
    placed: List[Tuple[int, int, int]] = []

    for _ in range(spec.count):
        for _try in range(_MAX_PLACEMENT_TRIES):
            r = int(rng.integers(spec.radius_min, spec.radius_max + 1))
            cx = int(rng.integers(r + 1, width - r - 1))
            cy = int(rng.integers(r + 1, height - r - 1))
            # keep a gap of more than 2px so that blobs never touch
            if all(
                (cx - px) ** 2 + (cy - py) ** 2 > (r + pr + 2) ** 2
                for px, py, pr in placed
            ):
                placed.append((cx, cy, r))
                mask |= (xx - cx) ** 2 + (yy - cy) ** 2 <= r ** 2
                break
        else:
            raise ValueError(
                f"Could not place {spec.count} disjoint lesions on a "
                f"{width}x{height} slide"
            )
    return mask


def generate_synthetic_slide(
    seed: int,
    dims: Tuple[int, int],
    lesion_spec: LesionSpec,
    color_shift: Sequence[float] = (0.0, 0.0, 0.0),
) -> Tuple[np.ndarray, np.ndarray]:
    """Generates a synthetic slide raster and its lesion mask.

    The slide contains blank (white) background, textured tissue and exactly
    `lesion_spec.count` disjoint circular lesions inside the tissue.

    Args:
        seed: The generation seed
        dims: The slide `(width, height)`, multiples of the patch size
        lesion_spec: The lesion blobs to place
        color_shift: RGB offset added to the stain colours

    Raises:
        ValueError: If the dims are not tile compatible or lesions do not fit

    Returns:
        `(rgb, mask)` as `(H, W, 3)` and `(H, W)` uint8 arrays, mask in {0, 1}
    """
    width, height = dims
    if width % PATCH_SIZE or height % PATCH_SIZE or width <= 0 or height <= 0:
        raise ValueError(f"Slide dims {dims} are not multiples of {PATCH_SIZE}")
    if lesion_spec.count > 0 and 2 * lesion_spec.radius_max + 2 >= min(width, height):
        raise ValueError(
            f"Lesion radius {lesion_spec.radius_max} exceeds slide dims {dims}"
        )

    rng = np.random.default_rng(seed)
    shift = np.asarray(color_shift, dtype=float)

    field = gaussian_filter(rng.standard_normal((height, width)), sigma=min(dims) / 10)
    tissue = field > np.quantile(field, 0.45)

    lesion = _place_lesions(rng, width, height, lesion_spec)
    tissue |= lesion

    shading = gaussian_filter(rng.standard_normal((height, width)), sigma=6.0)
    shading = 0.04 * shading / (np.abs(shading).max() or 1.0)
    tissue_nuclei = _nuclei(rng, (height, width), lesion_spec.nuclei_density)
    lesion_nuclei = _nuclei(rng, (height, width), lesion_spec.lesion_nuclei_density)

    base = np.where(lesion[..., None], _LESION + shift, _TISSUE + shift)
    nuclei = np.where(lesion, lesion_nuclei, tissue_nuclei)[..., None]
    stained = (1.0 - nuclei) * base + nuclei * (_NUCLEUS + shift)
    stained = stained + shading[..., None]

    blank = _BACKGROUND + rng.uniform(-0.01, 0.01, size=(height, width, 1))
    rgb = np.where(tissue[..., None], stained, blank)

    rgb8 = np.round(np.clip(rgb, 0.0, 1.0) * 255).astype(np.uint8)
    return rgb8, lesion.astype(np.uint8)


def _lesion_spec_for(spec: LesionSpec, lesion_class: LesionClass) -> LesionSpec:
    if lesion_class == LesionClass.NEGATIVE:
        return spec.copy(update={"count": 0})
    if lesion_class == LesionClass.MACRO:
        return spec
    if lesion_class == LesionClass.MICRO:
        r_max = max(4, spec.radius_max // 2)
        return spec.copy(
            update={
                "radius_min": min(r_max, max(4, spec.radius_min // 2)),
                "radius_max": r_max,
            }
        )
    r_max = max(4, spec.radius_min // 2)
    return spec.copy(update={"radius_min": min(3, r_max), "radius_max": r_max})


def synthesize_corpus(
    config: SyntheticConfig,
    train_centers: Sequence[int],
    test_centers: Sequence[int],
    out_dir: Path,
    seed: int,
    log: BoundLogger = None,
) -> List[SlideRef]:
    """Writes a synthetic slide corpus and its catalog.

    Each center gets `slides_per_center` slides; the first `support_slides`
    form its support set, the rest its query (train centers) or test set
    (test centers). Slides of test centers carry the configured stain shift.

    Returns:
        The slide catalog, also written to `out_dir/slides.jsonl`
    """
    log = (log or get_logger()).bind(out_dir=str(out_dir))
    out_dir.mkdir(parents=True, exist_ok=True)

    Faker.seed(seed)
    fake = Faker()

    cycle = [LesionClass.MACRO, LesionClass.MICRO, LesionClass.ITC]
    slides: List[SlideRef] = []
    for center in list(train_centers) + list(test_centers):
        is_test = center in test_centers
        shift = config.test_center_shift if is_test else (0.0, 0.0, 0.0)
        for j in range(config.slides_per_center):
            patient_id = str(fake.unique.random_int(min=0, max=999)).zfill(3)
            node_id = str(fake.random_int(min=0, max=4))
            slide_id = f"{patient_id}/{node_id}"
            lesion_class = cycle[j % len(cycle)]

            if j < config.support_slides:
                role = SetRole.SUPPORT
            else:
                role = SetRole.TEST if is_test else SetRole.QUERY

            rgb, mask = generate_synthetic_slide(
                seed=derive_seed(seed, slide_id),
                dims=(config.width, config.height),
                lesion_spec=_lesion_spec_for(config.lesions, lesion_class),
                color_shift=shift,
            )

            stem = f"c{center}_p{patient_id}_n{node_id}"
            image_path = out_dir / f"{stem}.png"
            Image.fromarray(rgb, mode="RGB").save(image_path)
            mask_path = None
            if lesion_class != LesionClass.NEGATIVE:
                mask_path = out_dir / f"{stem}_mask.png"
                Image.fromarray(mask * 255, mode="L").save(mask_path)

            slides.append(
                SlideRef(
                    slide_id=slide_id,
                    center_id=center,
                    patient_id=patient_id,
                    node_id=node_id,
                    lesion_class=lesion_class,
                    pn_stage=_STAGE_BY_CLASS[lesion_class],
                    set_role=role,
                    image_path=str(image_path),
                    mask_path=str(mask_path) if mask_path is not None else None,
                )
            )
            log.info(
                "Generated synthetic slide",
                slide_id=slide_id,
                center_id=center,
                set_role=role.value,
                lesion_class=lesion_class.value,
            )

    write_models(out_dir / CATALOG_NAME, slides)
    return slides
