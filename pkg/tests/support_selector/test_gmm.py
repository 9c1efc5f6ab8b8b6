import numpy as np
import pytest

from cofcn.core.errors import NonFiniteInputError
from cofcn.support_selector.config import ClusterModel
from cofcn.support_selector.gmm import (
    assign_cluster,
    fit_gmm,
    responsibilities,
)


@pytest.fixture
def blobs() -> np.ndarray:
    rng = np.random.default_rng(11)
    centers = np.array([[0.0, 0.0, 0.0], [10.0, 10.0, 0.0], [0.0, 10.0, 10.0]])
    return np.concatenate([c + 0.5 * rng.standard_normal((50, 3)) for c in centers])


def test_separated_blobs_get_one_component_each(blobs):
    model = fit_gmm(blobs, n_components=3, seed=0)

    clusters = [assign_cluster(v, model) for v in blobs]
    groups = [set(clusters[i : i + 50]) for i in range(0, 150, 50)]
    assert all(len(group) == 1 for group in groups)
    assert len(set.union(*groups)) == 3
    assert np.allclose(model.weights, [1 / 3] * 3, atol=1e-6)


def test_em_log_likelihood_never_decreases(blobs):
    model = fit_gmm(
        blobs, n_components=4, seed=5, tol=1e-10, max_iter=50, reg_covar=1e-10
    )

    history = np.asarray(model.log_likelihood)
    assert np.all(np.diff(history) >= -1e-9)


def test_fit_is_reproducible(blobs):
    a = fit_gmm(blobs, n_components=3, seed=2)
    b = fit_gmm(blobs, n_components=3, seed=2)
    assert a == b


def test_responsibilities_are_normalized(blobs):
    model = fit_gmm(blobs, n_components=3, seed=0)
    resp = responsibilities(blobs[:10], model)

    assert resp.shape == (10, 3)
    assert np.allclose(resp.sum(axis=1), 1.0)


def test_ties_go_to_the_lowest_component():
    model = ClusterModel(
        center_id=0,
        n_components=2,
        weights=[0.5, 0.5],
        means=[[1.0, 1.0], [1.0, 1.0]],
        covariances=[np.eye(2).tolist(), np.eye(2).tolist()],
    )
    assert assign_cluster([3.0, -2.0], model) == 0


def test_too_few_vectors(blobs):
    with pytest.raises(ValueError):
        fit_gmm(blobs[:2], n_components=3)


def test_non_finite_vectors(blobs):
    broken = blobs.copy()
    broken[3, 1] = np.inf
    with pytest.raises(NonFiniteInputError):
        fit_gmm(broken, n_components=3)


def test_cluster_model_rejects_invalid_covariance():
    with pytest.raises(ValueError):
        ClusterModel(
            center_id=0,
            n_components=1,
            weights=[1.0],
            means=[[0.0, 0.0]],
            covariances=[[[1.0, 0.0], [0.0, -1.0]]],
        )
