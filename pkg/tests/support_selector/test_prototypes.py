import random

import numpy as np
import pytest

from cofcn.core.model import (
    PatchLabel,
    PatchRef,
)
from cofcn.support_selector.prototypes import (
    PrototypeCandidate,
    build_prototype_pools,
    select_prototypes,
)


def _candidates(n: int, cluster_id: int = 0, label=PatchLabel.LESION, offset=0.0):
    rng = np.random.default_rng(n + cluster_id)
    return [
        PrototypeCandidate(
            patch_ref=PatchRef(f"{cluster_id}{label.bit}/{i:03d}", i, 0),
            cluster_id=cluster_id,
            label=label,
            pca_vector=tuple(float(v) for v in offset + rng.standard_normal(3)),
        )
        for i in range(n)
    ]


@pytest.mark.parametrize(
    "members,expected",
    [
        pytest.param(40, 2, id="two-microclusters"),
        pytest.param(45, 2, id="rounded-down"),
        pytest.param(5, 1, id="at-least-one"),
        pytest.param(1, 1, id="single-member"),
    ],
)
def test_prototype_count(members, expected):
    prototypes = select_prototypes(_candidates(members), microcluster_dim=20, seed=0)
    assert len(prototypes) == expected


def test_prototypes_are_members_of_their_group():
    members = _candidates(40)
    refs = {m.patch_ref for m in members}
    for prototype in select_prototypes(members, 20, seed=0):
        assert prototype.patch_ref in refs


def test_prototypes_do_not_depend_on_input_order():
    members = _candidates(60)
    shuffled = list(members)
    random.Random(4).shuffle(shuffled)

    assert select_prototypes(members, 20, seed=1) == select_prototypes(
        shuffled, 20, seed=1
    )


def test_pools_cover_every_cluster_and_class():
    candidates = _candidates(25, cluster_id=0) + _candidates(
        3, cluster_id=1, label=PatchLabel.NON_LESION, offset=5.0
    )
    pools = build_prototype_pools(candidates, center_id=2, n_components=3)

    assert [(p.cluster_id, p.label) for p in pools] == [
        (0, PatchLabel.LESION),
        (0, PatchLabel.NON_LESION),
        (1, PatchLabel.LESION),
        (1, PatchLabel.NON_LESION),
        (2, PatchLabel.LESION),
        (2, PatchLabel.NON_LESION),
    ]
    assert [len(p.prototypes) for p in pools] == [1, 0, 0, 1, 0, 0]
    assert all(p.center_id == 2 for p in pools)


def test_invalid_microcluster_dim():
    with pytest.raises(ValueError):
        build_prototype_pools(
            _candidates(4), center_id=0, n_components=1, microcluster_dim=0
        )
