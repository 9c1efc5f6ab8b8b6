"""Support assignments and support tensors for query patches."""

from pathlib import Path
from typing import (
    Dict,
    Iterable,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from structlog.stdlib import BoundLogger

from ..core.errors import MissingArtifactError
from ..core.logging import get_logger
from ..core.model import PatchRef
from ..latent_space.pca import project
from ..patch_pipeline.config import PatchRecord
from ..patch_pipeline.manifest import PatchStore
from .config import (
    SelectorArtifact,
    SupportAssignment,
)
from .gmm import assign_cluster
from .policy import select_support


__all__ = ["SupportProvider", "save_artifact", "load_artifact"]


def save_artifact(path: Path, artifact: SelectorArtifact):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(artifact.json(), encoding="utf-8")


def load_artifact(path: Path) -> SelectorArtifact:
    if not path.exists():
        raise MissingArtifactError(
            f"Selector artifact {path} does not exist", stage="prototypes"
        )
    return SelectorArtifact.parse_file(path)


class SupportProvider:
    """Selects support shots for query patches and loads their pixels.

    Query patches are located in the PCA space of their own center using
    their 8 channel latent vectors; the shots are loaded from the support
    set of that center.
    """

    def __init__(
        self,
        artifacts: Mapping[int, SelectorArtifact],
        support_records: Iterable[PatchRecord],
        store: PatchStore,
        latents: Optional[Mapping[PatchRef, Sequence[float]]] = None,
        log: BoundLogger = None,
    ):
        self.artifacts = dict(artifacts)
        self.support: Dict[PatchRef, PatchRecord] = {r.ref: r for r in support_records}
        self.store = store
        self.latents: Dict[PatchRef, Sequence[float]] = dict(latents or {})
        self.log = log or get_logger()
        self._cache: Dict[Tuple[PatchRef, int], SupportAssignment] = {}

    def artifact(self, center_id: int) -> SelectorArtifact:
        try:
            return self.artifacts[center_id]
        except KeyError as key_error:
            raise MissingArtifactError(
                f"No support selector for center {center_id}", stage="prototypes"
            ) from key_error

    def assign(
        self,
        query_ref: PatchRef,
        center_id: int,
        latent: Sequence[float],
        k: int,
    ) -> SupportAssignment:
        key = (query_ref, k)
        if key not in self._cache:
            artifact = self.artifact(center_id)
            z = project(latent, artifact.pca)
            cluster_id = assign_cluster(z, artifact.cluster)
            self._cache[key] = select_support(
                z,
                cluster_id,
                k,
                artifact,
                artifact.cluster,
                query_ref=query_ref,
                log=self.log,
            )
        return self._cache[key]

    def assign_record(self, record: PatchRecord, k: int) -> SupportAssignment:
        """Assigns support shots to a query record with a known latent vector"""
        try:
            latent = self.latents[record.ref]
        except KeyError as key_error:
            raise MissingArtifactError(
                f"No latent vector for query patch {record.ref}", stage="embed"
            ) from key_error
        return self.assign(record.ref, record.center_id, latent, k)

    def support_tensor(self, assignment: SupportAssignment) -> np.ndarray:
        """The `(3k, 128, 128)` channel stacked support shots"""
        shots = []
        for ref in assignment.shots:
            try:
                shots.append(self.store.patch_chw(self.support[ref]))
            except KeyError as key_error:
                raise MissingArtifactError(
                    f"Support patch {ref} is not in the support manifest",
                    stage="prepare",
                ) from key_error
        return np.concatenate(shots, axis=0).astype(np.float32)
