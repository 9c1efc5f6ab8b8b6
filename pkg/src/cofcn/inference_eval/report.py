"""Per slide evaluation and co-FCN versus U-Net comparison reports."""

import csv
import io
import math

from typing import (
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
    Union,
)

from pydantic import BaseModel
from structlog.stdlib import BoundLogger

from ..core.errors import SingleClassError
from ..core.logging import get_logger
from .config import (
    EvaluationConfig,
    RocResult,
    SlidePrediction,
)
from .roc import (
    delong_ci,
    delong_test,
)


__all__ = [
    "UNDEFINED",
    "EvaluationRow",
    "ComparisonRow",
    "evaluate_report",
    "compare_report",
    "percent_difference",
    "format_percent",
    "render_text",
    "render_tsv",
]

UNDEFINED = "n/a"

Row = Union["EvaluationRow", "ComparisonRow"]


class EvaluationRow(BaseModel):
    """ROC statistics of one model on one slide.

    `roc` is `None` when the slide lacks lesion or non-lesion patches.
    """

    slide_id: str
    model_name: str
    n_patches: int
    roc: Optional[RocResult] = None

    def cells(self) -> Dict[str, str]:
        roc = self.roc
        return {
            "slide": self.slide_id,
            "model": self.model_name,
            "patches": str(self.n_patches),
            "auc": roc.format() if roc else UNDEFINED,
            "ci_lo": f"{roc.ci95[0]:.3f}" if roc else UNDEFINED,
            "ci_hi": f"{roc.ci95[1]:.3f}" if roc else UNDEFINED,
            "pauc": f"{roc.pauc_spec90:.4f}"
            if roc and roc.pauc_spec90 is not None
            else UNDEFINED,
        }


class ComparisonRow(BaseModel):
    """Paired DeLong comparison of the co-FCN with k shots and the U-Net"""

    slide_id: str
    k: int
    auc_cofcn: float
    auc_unet: float
    delta_auc: float
    delta_auc_percent: float
    p_value: float
    sig_code: str

    def cells(self) -> Dict[str, str]:
        return {
            "slide": self.slide_id,
            "k": str(self.k),
            "auc_cofcn": f"{self.auc_cofcn:.3f}",
            "auc_unet": f"{self.auc_unet:.3f}",
            "difference": format_percent(self.delta_auc_percent),
            "p_value": f"{self.p_value:.3g}",
            "sig": self.sig_code,
        }


def percent_difference(auc_a: float, auc_b: float) -> float:
    """`100 * (auc_a - auc_b) / auc_b`; nan if `auc_b` is 0"""
    if auc_b == 0:
        return math.nan
    return 100.0 * (auc_a - auc_b) / auc_b


def format_percent(value: float) -> str:
    """Signed percentage with one decimal, e.g. `+20.2%` or `-1.2%`"""
    if math.isnan(value):
        return UNDEFINED
    rounded = round(value, 1)
    if rounded == 0:
        return "0.0%"
    return f"{rounded:+.1f}%"


def evaluate_report(
    predictions: Sequence[SlidePrediction],
    config: Optional[EvaluationConfig] = None,
    log: BoundLogger = None,
) -> List[EvaluationRow]:
    """Computes AUC, DeLong interval and partial AUC per slide and model.

    Slides with a single patch class get an undefined AUC and a warning.

    Returns:
        Rows ordered by slide id, then model name
    """
    config = config or EvaluationConfig()
    log = log or get_logger()
    rows = []
    for prediction in sorted(predictions, key=lambda p: (p.slide_id, p.model_name)):
        roc = None
        try:
            roc = delong_ci(
                prediction.scores,
                prediction.labels,
                level=config.ci_level,
                specificity_range=config.specificity_range,
            )
        except SingleClassError as err:
            log.warning(
                "AUC undefined",
                slide_id=prediction.slide_id,
                model=prediction.model_name,
                reason=str(err),
            )
        rows.append(
            EvaluationRow(
                slide_id=prediction.slide_id,
                model_name=prediction.model_name,
                n_patches=len(prediction.per_patch),
                roc=roc,
            )
        )
    return rows


def _unpaired_reason(a: SlidePrediction, b: SlidePrediction) -> Optional[str]:
    if [p.patch_ref for p in a.per_patch] != [p.patch_ref for p in b.per_patch]:
        return "patch sets differ"
    if a.labels.tolist() != b.labels.tolist():
        return "labels differ"
    return None


def compare_report(
    cofcn_by_k: Mapping[int, Mapping[str, SlidePrediction]],
    unet_by_slide: Mapping[str, SlidePrediction],
    slides: Sequence[str],
    log: BoundLogger = None,
) -> List[ComparisonRow]:
    """Tests every co-FCN against the U-Net on the same slide's patches.

    Args:
        cofcn_by_k: co-FCN predictions per shot count and slide id
        unet_by_slide: U-Net predictions per slide id
        slides: The slides to compare, in report order
        log: The logger to use

    Returns:
        One row per paired (slide, k), ordered by slide then k
    """
    log = log or get_logger()
    rows = []
    for slide_id in slides:
        unet = unet_by_slide.get(slide_id)
        for k in sorted(cofcn_by_k):
            cofcn = cofcn_by_k[k].get(slide_id)
            slide_log = log.bind(slide_id=slide_id, k=k)
            if unet is None or cofcn is None:
                slide_log.warning(
                    "Skipping unpaired slide",
                    reason="missing " + ("U-Net" if unet is None else "co-FCN"),
                )
                continue
            reason = _unpaired_reason(cofcn, unet)
            if reason is not None:
                slide_log.warning("Skipping unpaired slide", reason=reason)
                continue
            try:
                test = delong_test(cofcn.scores, unet.scores, unet.labels)
            except SingleClassError as err:
                slide_log.warning("AUC undefined", reason=str(err))
                continue
            rows.append(
                ComparisonRow(
                    slide_id=slide_id,
                    k=k,
                    auc_cofcn=test.auc_a,
                    auc_unet=test.auc_b,
                    delta_auc=test.delta_auc,
                    delta_auc_percent=test.delta_auc_percent,
                    p_value=test.p_value,
                    sig_code=test.sig_code,
                )
            )
    return rows


def render_text(rows: Sequence[Row]) -> str:
    """Aligned plain text table; empty string for no rows"""
    if not rows:
        return ""
    table = [row.cells() for row in rows]
    headers = list(table[0])
    widths = {
        h: max(len(h), *(len(cells[h]) for cells in table)) for h in headers
    }
    lines = ["  ".join(h.ljust(widths[h]) for h in headers).rstrip()]
    for cells in table:
        lines.append("  ".join(cells[h].ljust(widths[h]) for h in headers).rstrip())
    return "\n".join(lines) + "\n"


def render_tsv(rows: Sequence[Row]) -> str:
    """Tab separated records with full precision values"""
    if not rows:
        return ""
    records = [row.dict() for row in rows]
    for record in records:
        roc = record.pop("roc", None)
        if "roc" in rows[0].__fields__:
            record.update(
                {
                    "auc": roc["auc"] if roc else UNDEFINED,
                    "delong_variance": roc["delong_variance"] if roc else UNDEFINED,
                    "ci_lo": roc["ci95"][0] if roc else UNDEFINED,
                    "ci_hi": roc["ci95"][1] if roc else UNDEFINED,
                    "pauc": roc["pauc_spec90"] if roc else UNDEFINED,
                    "pauc_mcclish": roc["pauc_mcclish"] if roc else UNDEFINED,
                }
            )
    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=list(records[0]), delimiter="\t", lineterminator="\n"
    )
    writer.writeheader()
    for record in records:
        writer.writerow({key: _tsv_value(value) for key, value in record.items()})
    return buffer.getvalue()


def _tsv_value(value) -> str:
    if isinstance(value, float):
        return UNDEFINED if math.isnan(value) else repr(value)
    if value is None:
        return UNDEFINED
    return str(value)
