"""Slide level inference producing per patch lesion scores."""

import json

from pathlib import Path
from typing import (
    Dict,
    List,
    Optional,
    Sequence,
    Union,
)

import numpy as np
import torch

from structlog.stdlib import BoundLogger

from ..cofcn_model.network import (
    CoFcn,
    UNet,
)
from ..core.errors import (
    CheckpointMismatchError,
    MissingArtifactError,
    ShapeMismatchError,
)
from ..core.logging import get_logger
from ..core.model import PatchRef
from ..core.util import (
    format_float,
    read_jsonl,
)
from ..patch_pipeline.config import PatchRecord
from ..patch_pipeline.labeling import (
    central_region,
    label_patch_eval,
)
from ..patch_pipeline.manifest import PatchStore
from ..support_selector.provider import SupportProvider
from .config import (
    Aggregation,
    PatchPrediction,
    SlidePrediction,
)


__all__ = [
    "aggregate_central",
    "predict_slide",
    "model_name",
    "write_prediction",
    "read_prediction",
]

HEATMAP_KEY_SEPARATOR = "|"


def aggregate_central(
    seg_prob: np.ndarray,
    mode: Union[Aggregation, str] = Aggregation.MIN,
) -> float:
    """Reduces the central 64x64 window of a probability map to one score"""
    if seg_prob.ndim != 2:
        raise ShapeMismatchError(f"Expected a 2D probability map, got {seg_prob.shape}")
    center = central_region(seg_prob)
    if Aggregation(mode) == Aggregation.MIN:
        return float(center.min())
    return float(center.max())


def model_name(model: Union[CoFcn, UNet]) -> str:
    if isinstance(model, CoFcn):
        return f"cofcn-k{model.config.k_shots}"
    return "unet"


def predict_slide(
    model: Union[CoFcn, UNet],
    records: Sequence[PatchRecord],
    store: PatchStore,
    provider: Optional[SupportProvider] = None,
    k: Optional[int] = None,
    aggregation: Union[Aggregation, str] = Aggregation.MIN,
    batch_size: int = 16,
    log: BoundLogger = None,
) -> SlidePrediction:
    """Scores every tissue patch of a slide.

    The co-FCN selects k support shots per patch through the provider; the
    U-Net ignores both the provider and k.

    Args:
        model: The trained network
        records: The test manifest records of one slide
        store: The raster store
        provider: Support selection of the slide's center (co-FCN only)
        k: The number of shots (defaults to the model's)
        aggregation: Central window reduction
        batch_size: Patches per forward pass
        log: The logger to use

    Raises:
        MissingArtifactError: If a co-FCN has no support provider

    Returns:
        The patch scores ordered by patch reference
    """
    slide_ids = {r.slide_id for r in records}
    if len(slide_ids) > 1:
        raise ValueError(f"Records of several slides given: {sorted(slide_ids)}")
    slide_id = next(iter(slide_ids)) if slide_ids else ""
    log = (log or get_logger()).bind(slide_id=slide_id, model=model_name(model))

    conditioned = isinstance(model, CoFcn)
    if conditioned:
        if provider is None:
            raise MissingArtifactError(
                "co-FCN inference needs the support selector of the slide's center",
                stage="prototypes",
            )
        k = model.config.k_shots if k is None else k
        if k != model.config.k_shots:
            raise CheckpointMismatchError(
                f"Model was trained with k={model.config.k_shots}, got k={k}"
            )

    ordered = sorted(records, key=lambda r: r.ref)
    predictions: List[PatchPrediction] = []
    heatmap: Dict[PatchRef, np.ndarray] = {}
    model.eval()
    for start in range(0, len(ordered), batch_size):
        batch = ordered[start : start + batch_size]
        query = torch.from_numpy(
            np.stack([store.patch_chw(r) for r in batch]).astype(np.float32)
        )
        with torch.no_grad():
            if conditioned:
                support = torch.from_numpy(
                    np.stack(
                        [
                            provider.support_tensor(provider.assign_record(r, k))
                            for r in batch
                        ]
                    )
                )
                seg_prob = model(query, support).seg_prob.numpy()
            else:
                seg_prob = model(query).numpy()

        for record, prob in zip(batch, seg_prob):
            label = label_patch_eval(store.patch_mask(record))
            predictions.append(
                PatchPrediction(
                    patch_ref=record.ref,
                    origin_px=record.origin_px,
                    eval_label=label.bit,
                    lesion_prob=float(
                        np.clip(aggregate_central(prob, aggregation), 0.0, 1.0)
                    ),
                )
            )
            heatmap[record.ref] = central_region(prob).astype(np.float32)

    log.info("Predicted slide", n_patches=len(predictions))
    return SlidePrediction(
        slide_id=slide_id,
        model_name=model_name(model),
        per_patch=predictions,
        heatmap=heatmap,
    )


def _stem(slide_id: str) -> str:
    return slide_id.replace("/", "_")


def _heatmap_key(ref: PatchRef) -> str:
    return HEATMAP_KEY_SEPARATOR.join((ref.slide_id, str(ref.grid_x), str(ref.grid_y)))


def _patch_line(patch: PatchPrediction) -> str:
    # lesion_prob keeps 17 significant digits
    row = json.dumps(patch.dict(exclude={"lesion_prob"}))
    return f'{row[:-1]}, "lesion_prob": {format_float(patch.lesion_prob)}}}'


def write_prediction(out_dir: Path, prediction: SlidePrediction) -> List[Path]:
    """Writes the patch scores (JSON lines) and the heatmap (npz) of a slide"""
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / f"{_stem(prediction.slide_id)}.jsonl"
    heatmap_path = out_dir / f"{_stem(prediction.slide_id)}.npz"
    with open(records_path, "w", encoding="utf-8") as out:
        out.write(
            json.dumps(
                {"slide_id": prediction.slide_id, "model_name": prediction.model_name}
            )
        )
        out.write("\n")
        for patch in prediction.per_patch:
            out.write(_patch_line(patch))
            out.write("\n")
    np.savez_compressed(
        heatmap_path,
        **{_heatmap_key(ref): values for ref, values in prediction.heatmap.items()},
    )
    return [records_path, heatmap_path]


def read_prediction(path: Path) -> SlidePrediction:
    if not path.exists():
        raise MissingArtifactError(f"Prediction {path} does not exist", stage="infer")
    rows = list(read_jsonl(path))
    heatmap: Dict[PatchRef, np.ndarray] = {}
    heatmap_path = path.with_suffix(".npz")
    if heatmap_path.exists():
        with np.load(heatmap_path) as data:
            for key in data.files:
                slide_id, grid_x, grid_y = key.rsplit(HEATMAP_KEY_SEPARATOR, 2)
                heatmap[PatchRef(slide_id, int(grid_x), int(grid_y))] = data[key]
    return SlidePrediction(per_patch=rows[1:], heatmap=heatmap, **rows[0])
