"""Slide tiling, tissue filtering, patch labeling and balancing."""

from .balance import balance_manifest
from .config import (
    LabelingRule,
    PatchManifest,
    PatchRecord,
    PipelineConfig,
    SetRole,
    SlideRef,
)
from .labeling import (
    label_patch_eval,
    label_patch_train,
)
from .manifest import (
    PatchStore,
    extract_patches,
    prepare_manifests,
    read_manifest,
    write_manifest,
)
from .synthetic import generate_synthetic_slide
from .tiling import (
    grid_patches,
    tissue_filter,
)


__all__ = [
    "LabelingRule",
    "PatchManifest",
    "PatchRecord",
    "PatchStore",
    "PipelineConfig",
    "SetRole",
    "SlideRef",
    "balance_manifest",
    "extract_patches",
    "generate_synthetic_slide",
    "grid_patches",
    "label_patch_eval",
    "label_patch_train",
    "prepare_manifests",
    "read_manifest",
    "tissue_filter",
    "write_manifest",
]
