"""Class balancing by dropping a fraction of the non-lesion patches."""

import numpy as np

from ..core.model import PatchLabel
from ..core.util import positive_smaller_one
from .config import PatchManifest


__all__ = ["balance_manifest"]


def balance_manifest(
    manifest: PatchManifest,
    drop_fraction: float,
    seed: int,
) -> PatchManifest:
    """Drops a seeded random subset of the non-lesion records.

    Lesion records are always retained. Exactly
    `round((1 - drop_fraction) * N_nonlesion)` non-lesion records survive,
    drawn without replacement; the original record order is preserved.

    Args:
        manifest: The manifest to balance
        drop_fraction: The fraction of non-lesion records to drop
        seed: The sampling seed

    Returns:
        A new balanced manifest
    """
    positive_smaller_one(drop_fraction)

    non_lesion = [
        i for i, r in enumerate(manifest.records) if r.label == PatchLabel.NON_LESION
    ]
    n_keep = int(round((1.0 - drop_fraction) * len(non_lesion)))

    rng = np.random.default_rng(seed)
    kept = set(
        rng.choice(np.asarray(non_lesion, dtype=int), size=n_keep, replace=False)
        .tolist()
    )

    records = [
        r
        for i, r in enumerate(manifest.records)
        if r.label == PatchLabel.LESION or i in kept
    ]
    return PatchManifest(
        records=records,
        labeling_rule=manifest.labeling_rule,
        balance_seed=seed,
        drop_fraction=drop_fraction,
    )
