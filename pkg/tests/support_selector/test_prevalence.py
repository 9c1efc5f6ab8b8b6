import math

import numpy as np
import pytest

from cofcn.core.model import PatchLabel
from cofcn.support_selector.prevalence import (
    class_ratios,
    estimate_pi,
)


def test_class_ratios_per_cluster():
    r_pos, r_neg = class_ratios(
        [0, 0, 1, 2],
        [
            PatchLabel.LESION,
            PatchLabel.NON_LESION,
            PatchLabel.LESION,
            PatchLabel.NON_LESION,
        ],
        n_components=3,
    )
    assert r_pos.tolist() == [0.5, 0.5, 0.0]
    assert r_neg.tolist() == [0.5, 0.0, 0.5]


def test_absent_class_has_zero_ratios():
    r_pos, r_neg = class_ratios([0, 1], ["non_lesion", "non_lesion"], 2)
    assert r_pos.tolist() == [0.0, 0.0]
    assert r_neg.tolist() == [0.5, 0.5]


def test_estimate_pi():
    pi = estimate_pi([0.746, 0.254, 0.0], [0.103, 0.0, 0.0])

    assert math.isclose(pi[0], 0.746 / 0.849)
    assert round(pi[0], 4) == 0.8787
    assert pi[1] == 1.0
    assert pi[2] == 0.0


# Per center cluster shares in percent, clusters 0..5 (20% support samples)
CENTER_RATIOS = {
    0: (
        [17.3, 0.1, 7.1, 0.0, 0.9, 74.6],
        [14.6, 31.3, 16.5, 2.6, 24.8, 10.3],
    ),
    1: (
        [0.8, 23.8, 0.5, 0.6, 74.2, 0.0],
        [14.3, 36.8, 0.8, 31.8, 15.1, 1.1],
    ),
    2: (
        [0.0, 79.8, 13.0, 4.4, 0.2, 2.7],
        [59.0, 0.8, 8.3, 9.8, 19.6, 2.5],
    ),
    3: (
        [0.7, 0.8, 2.9, 78.1, 0.2, 11.4],
        [10.4, 16.6, 18.5, 2.3, 35.8, 16.3],
    ),
    4: (
        [15.5, 0.1, 0.3, 80.1, 0.0, 0.1],
        [6.5, 16.2, 12.1, 3.5, 51.4, 10.2],
    ),
}

# (center, cluster) -> prevalence in percent estimated from sampled counts
MAJORITY_LESION_CLUSTERS = {
    (0, 5): 86.3,
    (1, 4): 81.6,
    (2, 1): 97.1,
    (3, 3): 95.3,
    (4, 3): 94.1,
}


def _as_ratios(percent):
    # rounded percentages may add up to slightly more than 100
    ratios = np.asarray(percent) / 100
    return ratios / max(1.0, ratios.sum())


@pytest.mark.parametrize(
    "center",
    [pytest.param(center, id=f"center-{center}") for center in CENTER_RATIOS],
)
def test_estimate_pi_on_center_cluster_shares(center):
    r_pos, r_neg = (_as_ratios(p) for p in CENTER_RATIOS[center])

    pi = estimate_pi(r_pos, r_neg)

    assert pi.shape == (6,)
    for cluster in range(6):
        expected = r_pos[cluster] / (r_pos[cluster] + r_neg[cluster])
        assert abs(pi[cluster] - expected) <= 1e-12


@pytest.mark.parametrize(
    "center,cluster",
    [
        pytest.param(center, cluster, id=f"center-{center}-cluster-{cluster}")
        for center, cluster in MAJORITY_LESION_CLUSTERS
    ],
)
def test_majority_lesion_clusters_close_to_sampled_prevalence(center, cluster):
    r_pos, r_neg = (_as_ratios(p) for p in CENTER_RATIOS[center])

    pi = estimate_pi(r_pos, r_neg)

    sampled = MAJORITY_LESION_CLUSTERS[(center, cluster)] / 100
    assert abs(pi[cluster] - sampled) < 0.03
    assert pi[cluster] == max(pi)


@pytest.mark.parametrize(
    "scale",
    [
        pytest.param(0.5, id="half"),
        pytest.param(0.1, id="tenth"),
        pytest.param(1e-3, id="thousandth"),
    ],
)
def test_estimate_pi_is_scale_invariant(scale):
    r_pos, r_neg = (_as_ratios(p) for p in CENTER_RATIOS[3])

    base = estimate_pi(r_pos, r_neg)
    scaled = estimate_pi(r_pos * scale, r_neg * scale)

    np.testing.assert_allclose(scaled, base, rtol=1e-12, atol=0)


def test_class_ratios_ignore_count_scale():
    ids = [0, 0, 1, 2, 2, 2]
    labels = [
        PatchLabel.LESION,
        PatchLabel.LESION,
        PatchLabel.NON_LESION,
        PatchLabel.LESION,
        PatchLabel.NON_LESION,
        PatchLabel.NON_LESION,
    ]

    base = estimate_pi(*class_ratios(ids, labels, 3))
    scaled = estimate_pi(*class_ratios(ids * 7, labels * 7, 3))

    np.testing.assert_allclose(scaled, base, rtol=1e-12, atol=0)


@pytest.mark.parametrize(
    "r_pos,r_neg",
    [
        pytest.param([0.6, 0.6], [0.5, 0.5], id="sum-above-one"),
        pytest.param([-0.1, 0.5], [0.5, 0.5], id="negative"),
        pytest.param([0.5], [0.5, 0.5], id="length-mismatch"),
        pytest.param([np.nan, 0.5], [0.5, 0.5], id="non-finite"),
    ],
)
def test_invalid_ratios(r_pos, r_neg):
    with pytest.raises(ValueError):
        estimate_pi(r_pos, r_neg)


def test_cluster_ids_out_of_range():
    with pytest.raises(ValueError):
        class_ratios([0, 3], [PatchLabel.LESION, PatchLabel.LESION], 3)
