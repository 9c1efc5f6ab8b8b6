"""k-means prototype pools per (cluster, class) group."""

from typing import (
    Dict,
    List,
    NamedTuple,
    Sequence,
    Tuple,
)

import numpy as np

from sklearn.cluster import KMeans

from ..core.model import (
    PatchLabel,
    PatchRef,
)
from .config import (
    Prototype,
    PrototypePool,
)


__all__ = ["PrototypeCandidate", "build_prototype_pools", "select_prototypes"]


class PrototypeCandidate(NamedTuple):
    """A support patch with its cluster, class and PCA vector"""

    patch_ref: PatchRef
    cluster_id: int
    label: PatchLabel
    pca_vector: Tuple[float, ...]


def select_prototypes(
    members: Sequence[PrototypeCandidate],
    microcluster_dim: int,
    seed: int,
) -> List[Prototype]:
    """Picks the member nearest to each k-means centroid of a group.

    Members are sorted by patch reference first so the result does not
    depend on their input order.
    """
    if microcluster_dim < 1:
        raise ValueError("microcluster_dim must be >= 1")
    if not members:
        return []

    ordered = sorted(members, key=lambda m: m.patch_ref)
    x = np.asarray([m.pca_vector for m in ordered], dtype=np.float64)
    n_clusters = max(1, len(ordered) // microcluster_dim)
    kmeans = KMeans(n_clusters=n_clusters, n_init=10, random_state=seed).fit(x)

    chosen: List[int] = []
    for j, centroid in enumerate(kmeans.cluster_centers_):
        member_idx = np.flatnonzero(kmeans.labels_ == j)
        if member_idx.size == 0:
            member_idx = np.arange(len(ordered))
        distances = np.sum((x[member_idx] - centroid) ** 2, axis=1)
        # argmin returns the first index, i.e. the smallest patch_ref on ties
        idx = int(member_idx[np.argmin(distances)])
        if idx not in chosen:
            chosen.append(idx)

    return [
        Prototype(
            patch_ref=ordered[i].patch_ref,
            pca_vector=[float(v) for v in ordered[i].pca_vector],
        )
        for i in sorted(chosen)
    ]


def build_prototype_pools(
    candidates: Sequence[PrototypeCandidate],
    center_id: int,
    n_components: int,
    microcluster_dim: int = 20,
    seed: int = 0,
) -> List[PrototypePool]:
    """Builds one lesion and one non-lesion pool per GMM cluster.

    Groups with `n` members get `max(1, n // microcluster_dim)` prototypes;
    empty groups produce empty pools.
    """
    if microcluster_dim < 1:
        raise ValueError("microcluster_dim must be >= 1")

    groups: Dict[Tuple[int, PatchLabel], List[PrototypeCandidate]] = {}
    for candidate in candidates:
        key = (candidate.cluster_id, PatchLabel.validate(candidate.label))
        groups.setdefault(key, []).append(candidate)

    pools: List[PrototypePool] = []
    for cluster_id in range(n_components):
        for label in (PatchLabel.LESION, PatchLabel.NON_LESION):
            pools.append(
                PrototypePool(
                    center_id=center_id,
                    cluster_id=cluster_id,
                    label=label,
                    prototypes=select_prototypes(
                        groups.get((cluster_id, label), []), microcluster_dim, seed
                    ),
                )
            )
    return pools
