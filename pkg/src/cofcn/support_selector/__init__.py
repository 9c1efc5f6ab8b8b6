"""Unsupervised support set selection for few-shot segmentation."""

from .config import (
    ClusterModel,
    Prototype,
    PrototypePool,
    SelectorArtifact,
    SelectorConfig,
    SupportAssignment,
)
from .gmm import (
    assign_cluster,
    fit_gmm,
    responsibilities,
)
from .policy import (
    select_support,
    shot_classes,
)
from .prevalence import (
    class_ratios,
    estimate_pi,
)
from .prototypes import (
    PrototypeCandidate,
    build_prototype_pools,
)
from .provider import (
    SupportProvider,
    load_artifact,
    save_artifact,
)


__all__ = [
    "ClusterModel",
    "Prototype",
    "PrototypeCandidate",
    "PrototypePool",
    "SelectorArtifact",
    "SelectorConfig",
    "SupportAssignment",
    "SupportProvider",
    "assign_cluster",
    "build_prototype_pools",
    "class_ratios",
    "estimate_pi",
    "fit_gmm",
    "load_artifact",
    "responsibilities",
    "save_artifact",
    "select_support",
    "shot_classes",
]
