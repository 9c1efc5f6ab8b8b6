"""Configuration and record models of the patch pipeline."""

from enum import Enum
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Tuple,
)

from pydantic import (
    BaseModel,
    Field,
    root_validator,
    validator,
)

from ..core.config import (
    FractionConfig,
    SeededConfig,
)
from ..core.model import (
    PatchLabel,
    PatchRef,
)
from ..core.util import (
    greater_zero,
    positive_smaller_one,
)


__all__ = [
    "PATCH_SIZE",
    "CENTRAL_START",
    "CENTRAL_STOP",
    "LesionClass",
    "PnStage",
    "SetRole",
    "LabelingRule",
    "SlideRef",
    "PatchRecord",
    "PatchManifest",
    "TissueFilterConfig",
    "DropFractions",
    "PipelineConfig",
    "LesionSpec",
    "SyntheticConfig",
]

PATCH_SIZE: int = 128
"""Patch edge length in pixels at 20x magnification"""

CENTRAL_START: int = 32
CENTRAL_STOP: int = 96
"""The central 64x64 window spans rows/cols [32, 96)"""

N_CENTERS: int = 5


class LesionClass(str, Enum):
    NEGATIVE = "negative"
    ITC = "ITC"
    MICRO = "micro"
    MACRO = "macro"


class PnStage(str, Enum):
    PN0 = "pN0"
    PN0_I = "pN0i+"
    PN1MI = "pN1mi"
    PN1 = "pN1"
    PN2 = "pN2"


class SetRole(str, Enum):
    SUPPORT = "support"
    QUERY = "query"
    TEST = "test"


class LabelingRule(str, Enum):
    TRAIN_MAJORITY = "train_majority"
    """lesion iff at least half of the central window is lesion"""

    EVAL_ANY_PIXEL = "eval_any_pixel"
    """lesion iff at least one central pixel is lesion"""


class SlideRef(BaseModel):
    """A slide of the catalog together with its metadata"""

    slide_id: str = Field(
        ...,
        description="Unique slide identifier in 'patient ID/node ID' notation",
    )

    center_id: int = Field(
        ...,
        description="The medical center the slide was acquired by",
    )

    patient_id: str = Field(..., description="The patient identifier")

    node_id: str = Field(..., description="The lymph node identifier")

    lesion_class: LesionClass = Field(
        ...,
        description="The largest lesion type present on the slide",
    )

    pn_stage: PnStage = Field(..., description="The patients pN-stage")

    set_role: SetRole = Field(
        ...,
        description="The set (support, query or test) the slide belongs to",
    )

    image_path: str = Field(..., description="Path of the RGB slide raster")

    mask_path: Optional[str] = Field(
        None,
        description="Path of the binary lesion annotation (annotated slides only)",
    )

    @validator("center_id")
    def check_center(cls, v: int) -> int:
        assert 0 <= v < N_CENTERS, f"center_id must be in 0..{N_CENTERS - 1}"
        return v

    @root_validator(skip_on_failure=True)
    def check_annotation(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        annotated = values["lesion_class"] != LesionClass.NEGATIVE
        assert annotated == (
            values.get("mask_path") is not None
        ), "mask_path must be present iff the slide is annotated"
        return values


class PatchRecord(BaseModel):
    """One tissue tile of a slide"""

    slide_id: str
    grid_x: int = Field(..., ge=0)
    grid_y: int = Field(..., ge=0)
    origin_px: Tuple[int, int] = Field(
        ...,
        description="Top left (x, y) pixel of the tile at 20x magnification",
    )
    size_px: int = Field(PATCH_SIZE, description="Tile edge length")
    label: PatchLabel
    central_lesion_fraction: float = Field(
        ...,
        description="Fraction of lesion pixels in the central 64x64 window",
    )
    center_id: int
    set_role: SetRole
    image_path: str
    mask_path: Optional[str] = None

    _validate_fraction = validator("central_lesion_fraction", allow_reuse=True)(
        positive_smaller_one
    )

    @validator("size_px")
    def check_size(cls, v: int) -> int:
        assert v == PATCH_SIZE, f"size_px must be {PATCH_SIZE}"
        return v

    @property
    def ref(self) -> PatchRef:
        return PatchRef(self.slide_id, self.grid_x, self.grid_y)


def label_consistent(record: PatchRecord, rule: LabelingRule) -> bool:
    fraction = record.central_lesion_fraction
    if rule == LabelingRule.TRAIN_MAJORITY:
        expected = fraction >= 0.5
    else:
        expected = fraction > 0
    return expected == (record.label == PatchLabel.LESION)


class PatchManifest(BaseModel):
    """An ordered, labelled collection of patches"""

    records: List[PatchRecord] = Field(
        [],
        description="Patch records in (slide, row, column) order",
    )

    labeling_rule: LabelingRule = Field(
        LabelingRule.TRAIN_MAJORITY,
        description="The rule the patch labels were derived with",
    )

    balance_seed: int = Field(0, description="Seed used for balancing")

    drop_fraction: float = Field(
        0.0,
        description="Fraction of non-lesion patches dropped while balancing",
    )

    _validate_drop = validator("drop_fraction", allow_reuse=True)(
        positive_smaller_one
    )

    @root_validator(skip_on_failure=True)
    def check_records(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        seen = set()
        rule = values["labeling_rule"]
        for record in values["records"]:
            assert record.ref not in seen, f"Duplicate patch record {record.ref}"
            seen.add(record.ref)
            assert label_consistent(
                record, rule
            ), f"Label of {record.ref} inconsistent with rule {rule.value}"
        return values

    def for_center(self, center_id: int) -> List[PatchRecord]:
        return [r for r in self.records if r.center_id == center_id]

    @property
    def n_lesion(self) -> int:
        return sum(1 for r in self.records if r.label == PatchLabel.LESION)


class TissueFilterConfig(BaseModel):
    """Background removal configuration"""

    blur_sigma: float = Field(
        2.0,
        description="Gaussian blur sigma (pixels) applied to the saturation channel",
    )

    threshold: float = Field(
        0.10,
        description="Minimum of the blurred saturation maximum (fraction of full)",
    )

    _validate_sigma = validator("blur_sigma", allow_reuse=True)(greater_zero)
    _validate_threshold = validator("threshold", allow_reuse=True)(
        positive_smaller_one
    )


class DropFractions(FractionConfig):
    """Fraction of non-lesion patches dropped per set while balancing"""

    support: float = Field(0.85, description="Drop fraction for the support set")
    query: float = Field(0.95, description="Drop fraction for the query set")
    test: float = Field(0.0, description="Drop fraction for the test set")


class PipelineConfig(SeededConfig):
    """Patch pipeline configuration"""

    tissue: TissueFilterConfig = Field(
        TissueFilterConfig(),
        description="The tissue filter configuration",
    )

    drop_fractions: DropFractions = Field(
        DropFractions(),
        description="Balancing drop fractions per set role",
    )

    labeling: Optional[LabelingRule] = Field(
        None,
        description=(
            "Labeling rule of every set; by default support and query patches "
            "use the training rule and test patches the evaluation rule"
        ),
    )


class LesionSpec(BaseModel):
    """Lesion blobs placed on a synthetic slide"""

    count: int = Field(3, ge=0, description="Number of disjoint lesion blobs")

    radius_min: int = Field(16, ge=1, description="Minimum blob radius in pixels")

    radius_max: int = Field(48, ge=1, description="Maximum blob radius in pixels")

    nuclei_density: float = Field(
        0.02,
        description="Fraction of tissue pixels seeding a dark nucleus",
    )

    lesion_nuclei_density: float = Field(
        0.12,
        description="Fraction of lesion pixels seeding a dark nucleus",
    )

    @validator("radius_max")
    def check_radius_order(cls, v: int, values: Dict[str, Any]) -> int:
        if "radius_min" in values:
            assert v >= values["radius_min"], "radius_max must be >= radius_min"
        return v

    _validate_density = validator(
        "nuclei_density", "lesion_nuclei_density", allow_reuse=True
    )(positive_smaller_one)


class SyntheticConfig(BaseModel):
    """Desk scale synthetic slide corpus configuration"""

    slides_per_center: int = Field(3, ge=1, description="Slides generated per center")

    support_slides: int = Field(
        2,
        ge=1,
        description="How many of each centers slides form its support set",
    )

    width: int = Field(1024, description="Slide width in pixels")

    height: int = Field(1024, description="Slide height in pixels")

    lesions: LesionSpec = Field(LesionSpec(), description="Lesion generation")

    test_center_shift: Tuple[float, float, float] = Field(
        (0.06, -0.08, 0.04),
        description="RGB stain shift applied to slides of test centers",
    )

    @validator("width", "height")
    def check_tile_compatible(cls, v: int) -> int:
        assert v >= PATCH_SIZE and v % PATCH_SIZE == 0, (
            f"slide dimensions must be positive multiples of {PATCH_SIZE}"
        )
        return v

    @validator("support_slides")
    def check_support_slides(cls, v: int, values: Dict[str, Any]) -> int:
        if "slides_per_center" in values:
            assert (
                v < values["slides_per_center"]
            ), "support_slides must leave at least one query/test slide per center"
        return v
