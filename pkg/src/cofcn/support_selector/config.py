"""Configuration and record models of the support selector."""

import math

from typing import (
    Any,
    Dict,
    List,
    Optional,
)

import numpy as np

from pydantic import (
    BaseModel,
    Field,
    root_validator,
    validator,
)

from ..core.config import SeededConfig
from ..core.model import (
    PatchLabel,
    PatchRef,
)
from ..core.util import (
    greater_equal_one,
    greater_zero,
)
from ..latent_space.config import PcaModel


__all__ = [
    "SelectorConfig",
    "ClusterModel",
    "Prototype",
    "PrototypePool",
    "SupportAssignment",
    "SelectorArtifact",
]

SELECTOR_SCHEMA = 1


class SelectorConfig(SeededConfig):
    """GMM clustering and prototype pool configuration"""

    n_components: int = Field(6, description="Number of GMM components per center")

    microcluster_dim: int = Field(
        20,
        description="Average number of support patches represented by one prototype",
    )

    pca_dims: int = Field(3, ge=1, description="PCA output dimensions")

    tol: float = Field(
        1e-4,
        description="EM stops once the mean log-likelihood changes less than this",
    )

    max_iter: int = Field(200, ge=1, description="Maximum EM iterations")

    reg_covar: float = Field(
        1e-6,
        description="Value added to the covariance diagonals",
    )

    _validate_counts = validator(
        "n_components", "microcluster_dim", allow_reuse=True
    )(greater_equal_one)
    _validate_tol = validator("tol", "reg_covar", allow_reuse=True)(greater_zero)


class ClusterModel(BaseModel):
    """A fitted Gaussian mixture over the PCA vectors of one center"""

    center_id: int
    n_components: int = 6
    weights: List[float]
    means: List[List[float]]
    covariances: List[List[List[float]]]
    pi_l: Optional[List[float]] = Field(
        None,
        description="Estimated lesion prevalence per component",
    )
    log_likelihood: List[float] = Field(
        [],
        description="Mean log-likelihood after every EM iteration",
    )
    converged: bool = False

    @validator("weights")
    def check_weights(cls, v: List[float]) -> List[float]:
        assert abs(math.fsum(v) - 1.0) <= 1e-9, "weights must sum to 1"
        assert all(w >= 0 for w in v), "weights must be non-negative"
        return v

    @validator("covariances")
    def check_covariances(cls, v: List[List[List[float]]]) -> List[List[List[float]]]:
        for cov in np.asarray(v, dtype=np.float64):
            assert np.allclose(cov, cov.T), "covariances must be symmetric"
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as err:
                raise ValueError("covariances must be positive definite") from err
        return v

    @validator("pi_l")
    def check_pi(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None:
            assert all(
                math.isfinite(p) and 0 <= p <= 1 for p in v
            ), "pi_l must be finite and in [0, 1]"
        return v

    @root_validator(skip_on_failure=True)
    def check_component_count(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        n = values["n_components"]
        for key in ("weights", "means", "covariances"):
            assert len(values[key]) == n, f"{key} must have {n} entries"
        if values.get("pi_l") is not None:
            assert len(values["pi_l"]) == n, f"pi_l must have {n} entries"
        return values


class Prototype(BaseModel):
    patch_ref: PatchRef
    pca_vector: List[float]


class PrototypePool(BaseModel):
    """Prototypes of one (cluster, class) group; may be empty"""

    center_id: int
    cluster_id: int
    label: PatchLabel
    prototypes: List[Prototype] = []

    @validator("prototypes")
    def check_unique(cls, v: List[Prototype]) -> List[Prototype]:
        refs = [p.patch_ref for p in v]
        assert len(refs) == len(set(refs)), "prototypes must be unique by patch_ref"
        return v


class SupportAssignment(BaseModel):
    """The k support shots chosen for one query patch"""

    query_ref: Optional[PatchRef]
    cluster_id: int
    pi: float = Field(..., description="Lesion prevalence of the query's cluster")
    shot_classes: List[int] = Field(
        ...,
        description="Pool digit per shot, most significant first (1 = lesion)",
    )
    shots: List[PatchRef]

    @root_validator(skip_on_failure=True)
    def check_shots(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        shots = values["shots"]
        assert len(shots) == len(values["shot_classes"]), "need one shot per digit"
        assert len(set(shots)) == len(shots), "shots must be pairwise distinct"
        return values

    @property
    def k(self) -> int:
        return len(self.shots)


class SelectorArtifact(BaseModel):
    """Everything needed to select support shots for one center"""

    schema_version: int = SELECTOR_SCHEMA
    center_id: int
    pca: PcaModel
    cluster: ClusterModel
    pools: List[PrototypePool]

    @validator("schema_version")
    def check_schema(cls, v: int) -> int:
        assert v == SELECTOR_SCHEMA, f"unsupported selector schema version {v}"
        return v

    def pool(self, cluster_id: int, label: PatchLabel) -> PrototypePool:
        for pool in self.pools:
            if pool.cluster_id == cluster_id and pool.label == label:
                return pool
        return PrototypePool(
            center_id=self.center_id, cluster_id=cluster_id, label=label
        )
