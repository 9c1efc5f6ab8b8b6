"""Evaluation configuration and result models."""

from enum import Enum
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Tuple,
)

import numpy as np

from pydantic import (
    BaseModel,
    Field,
    root_validator,
    validator,
)

from ..core.model import PatchRef
from ..core.util import (
    open_unit_interval,
    positive_smaller_one,
)


__all__ = [
    "Aggregation",
    "EvaluationConfig",
    "PatchPrediction",
    "SlidePrediction",
    "RocResult",
    "DelongTestResult",
]


class Aggregation(str, Enum):
    MIN = "min"
    MAX = "max"


class EvaluationConfig(BaseModel):
    """Inference, statistics and rendering configuration"""

    aggregation: Aggregation = Field(
        Aggregation.MIN,
        description="How central pixel probabilities are reduced to a patch score",
    )

    ci_level: float = Field(0.95, description="Confidence level of the AUC interval")

    specificity_range: Tuple[float, float] = Field(
        (0.90, 1.00),
        description="Specificity interval of the partial AUC",
    )

    heatmap_threshold: float = Field(
        0.75,
        description="Probabilities below this are rendered transparent",
    )

    overlay_opacity: float = Field(
        0.6,
        description="Opacity of the heatmap over the slide raster",
    )

    batch_size: int = Field(16, ge=1, description="Patches per inference batch")

    _validate_level = validator("ci_level", allow_reuse=True)(open_unit_interval)
    _validate_fractions = validator(
        "heatmap_threshold", "overlay_opacity", allow_reuse=True
    )(positive_smaller_one)

    @validator("specificity_range")
    def check_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = v
        assert 0 <= lo < hi <= 1, "specificity range must satisfy 0 <= lo < hi <= 1"
        return v


class PatchPrediction(BaseModel):
    patch_ref: PatchRef
    origin_px: Tuple[int, int]
    eval_label: int = Field(..., description="Any-pixel central lesion label bit")
    lesion_prob: float

    @validator("eval_label")
    def check_bit(cls, v: int) -> int:
        assert v in (0, 1), "eval_label must be 0 or 1"
        return v

    _validate_prob = validator("lesion_prob", allow_reuse=True)(positive_smaller_one)


class SlidePrediction(BaseModel):
    """Patch scores of one slide for one model"""

    slide_id: str
    model_name: str = Field(..., description="'unet' or 'cofcn-k<k>'")
    per_patch: List[PatchPrediction] = []
    heatmap: Dict[PatchRef, np.ndarray] = Field(
        {},
        description="Central 64x64 lesion probabilities per patch",
    )

    class Config:
        arbitrary_types_allowed = True

    @validator("per_patch")
    def check_unique(cls, v: List[PatchPrediction]) -> List[PatchPrediction]:
        refs = [p.patch_ref for p in v]
        assert len(refs) == len(set(refs)), "every patch must appear exactly once"
        return v

    @property
    def scores(self) -> np.ndarray:
        return np.asarray([p.lesion_prob for p in self.per_patch], dtype=np.float64)

    @property
    def labels(self) -> np.ndarray:
        return np.asarray([p.eval_label for p in self.per_patch], dtype=int)


class RocResult(BaseModel):
    auc: float
    delong_variance: float = Field(..., ge=0)
    ci95: Tuple[float, float]
    pauc_spec90: Optional[float] = None
    pauc_mcclish: Optional[float] = None
    n_pos: int = Field(..., ge=1)
    n_neg: int = Field(..., ge=1)

    @root_validator(skip_on_failure=True)
    def check_interval(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        lo, hi = values["ci95"]
        assert lo <= values["auc"] <= hi, "auc must lie inside its interval"
        return values

    def format(self) -> str:
        """`auc ± half width` with three decimals"""
        lo, hi = self.ci95
        return f"{self.auc:.3f} ± {(hi - lo) / 2:.3f}"


class DelongTestResult(BaseModel):
    auc_a: float
    auc_b: float
    delta_auc: float = Field(..., description="auc_a - auc_b")
    delta_auc_percent: float = Field(
        ...,
        description="100 * (auc_a - auc_b) / auc_b (nan if auc_b is 0)",
    )
    z: float
    p_value: float
    sig_code: str
