"""Binary digit shot policy and nearest prototype support selection."""

import math

from typing import (
    List,
    Optional,
    Sequence,
    Set,
)

import numpy as np

from structlog.stdlib import BoundLogger

from ..core.errors import (
    EmptyPoolError,
    NonFiniteInputError,
)
from ..core.logging import get_logger
from ..core.model import (
    PatchLabel,
    PatchRef,
)
from .config import (
    ClusterModel,
    PrototypePool,
    SelectorArtifact,
    SupportAssignment,
)


__all__ = ["shot_classes", "select_support", "nearest_unused"]

_OPPOSITE = {
    PatchLabel.LESION: PatchLabel.NON_LESION,
    PatchLabel.NON_LESION: PatchLabel.LESION,
}


def shot_classes(pi: float, k: int) -> List[int]:
    """Encodes `min(floor(pi * 2**k), 2**k - 1)` with k binary digits.

    Digits are ordered most significant first; 1 selects the lesion pool.

    Raises:
        ValueError: If pi is outside [0, 1] or k < 1
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not (math.isfinite(pi) and 0.0 <= pi <= 1.0):
        raise ValueError(f"pi must be in [0, 1], got {pi}")
    n = min(int(math.floor(pi * 2 ** k)), 2 ** k - 1)
    return [(n >> (k - 1 - i)) & 1 for i in range(k)]


def nearest_unused(
    query: np.ndarray,
    pool: PrototypePool,
    used: Set[PatchRef],
) -> Optional[PatchRef]:
    """The closest prototype not in `used`; distance ties go to the smaller ref"""
    best = None
    for prototype in pool.prototypes:
        if prototype.patch_ref in used:
            continue
        distance = float(np.sum((np.asarray(prototype.pca_vector) - query) ** 2))
        key = (distance, prototype.patch_ref)
        if best is None or key < best:
            best = key
    return best[1] if best is not None else None


def _pool(pools, center_id: int, cluster_id: int, label: PatchLabel) -> PrototypePool:
    if isinstance(pools, SelectorArtifact):
        return pools.pool(cluster_id, label)
    for pool in pools:
        if pool.cluster_id == cluster_id and pool.label == label:
            return pool
    return PrototypePool(center_id=center_id, cluster_id=cluster_id, label=label)


def select_support(
    query_pca: Sequence[float],
    cluster_id: int,
    k: int,
    pools,
    model: ClusterModel,
    query_ref: Optional[PatchRef] = None,
    log: BoundLogger = None,
) -> SupportAssignment:
    """Chooses k distinct support shots for a query patch.

    The cluster prevalence decides the pool of every shot. Each shot is
    the nearest not yet used prototype of its pool; if that pool is
    exhausted the opposite class pool is used instead.

    Args:
        query_pca: The query's PCA vector
        cluster_id: The query's GMM cluster
        k: The number of shots
        pools: The prototype pools (or a selector artifact) of the center
        model: The cluster model carrying the prevalence estimates
        query_ref: The query patch, recorded in the assignment
        log: The logger to use

    Raises:
        EmptyPoolError: If neither pool has an unused prototype left

    Returns:
        The support assignment
    """
    log = (log or get_logger()).bind(center_id=model.center_id, cluster_id=cluster_id)
    query = np.asarray(query_pca, dtype=np.float64)
    if not np.all(np.isfinite(query)):
        raise NonFiniteInputError("Query vector must be finite")
    if model.pi_l is None:
        raise ValueError("Cluster model has no prevalence estimates")
    if not 0 <= cluster_id < model.n_components:
        raise ValueError(f"cluster_id {cluster_id} not in model")

    pi = model.pi_l[cluster_id]
    digits = shot_classes(pi, k)
    used: Set[PatchRef] = set()
    shots: List[PatchRef] = []
    for position, digit in enumerate(digits):
        wanted = PatchLabel.LESION if digit == 1 else PatchLabel.NON_LESION
        ref = nearest_unused(
            query, _pool(pools, model.center_id, cluster_id, wanted), used
        )
        if ref is None:
            other = _OPPOSITE[wanted]
            ref = nearest_unused(
                query, _pool(pools, model.center_id, cluster_id, other), used
            )
            if ref is None:
                raise EmptyPoolError(
                    f"No unused prototype left in cluster {cluster_id} "
                    f"of center {model.center_id} for shot {position}"
                )
            log.warning(
                "Prototype pool exhausted, using opposite class",
                shot=position,
                wanted=wanted.value,
                query_ref=query_ref,
            )
        used.add(ref)
        shots.append(ref)

    return SupportAssignment(
        query_ref=query_ref,
        cluster_id=cluster_id,
        pi=pi,
        shot_classes=digits,
        shots=shots,
    )
