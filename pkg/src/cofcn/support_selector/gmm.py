"""Full covariance Gaussian mixtures fitted with expectation maximization."""

from typing import (
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from scipy.linalg import (
    cholesky,
    solve_triangular,
)
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus
from structlog.stdlib import BoundLogger

from ..core.errors import (
    NonFiniteInputError,
    ShapeMismatchError,
)
from ..core.logging import get_logger
from .config import ClusterModel


__all__ = ["fit_gmm", "assign_cluster", "responsibilities", "log_densities"]


def _log_gaussian(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    chol = cholesky(cov, lower=True)
    z = solve_triangular(chol, (x - mean).T, lower=True)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    d = x.shape[1]
    return -0.5 * (d * np.log(2 * np.pi) + log_det + np.sum(z ** 2, axis=0))


def _weighted_log_prob(
    x: np.ndarray,
    weights: np.ndarray,
    means: np.ndarray,
    covariances: np.ndarray,
) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return np.stack(
        [
            log_w[g] + _log_gaussian(x, means[g], covariances[g])
            for g in range(len(weights))
        ],
        axis=1,
    )


def _m_step(
    x: np.ndarray,
    resp: np.ndarray,
    reg_covar: float,
    fallback_means: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    _, d = x.shape
    counts = resp.sum(axis=0)
    weights = counts / counts.sum()
    weights = weights / weights.sum()

    means = np.empty((resp.shape[1], d))
    covariances = np.empty((resp.shape[1], d, d))
    for g in range(resp.shape[1]):
        if counts[g] <= 10 * np.finfo(np.float64).eps:
            # an empty component keeps its previous mean and a floor covariance
            means[g] = fallback_means[g]
            covariances[g] = np.eye(d) * reg_covar
            continue
        means[g] = resp[:, g] @ x / counts[g]
        diff = x - means[g]
        cov = (resp[:, g, None] * diff).T @ diff / counts[g]
        covariances[g] = 0.5 * (cov + cov.T) + np.eye(d) * reg_covar
    return weights, means, covariances


def _as_points(vectors: Sequence[Sequence[float]]) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatchError(f"Expected a list of vectors, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInputError("GMM input contains non-finite values")
    return x


def fit_gmm(
    vectors: Sequence[Sequence[float]],
    n_components: int = 6,
    seed: int = 0,
    center_id: int = 0,
    tol: float = 1e-4,
    max_iter: int = 200,
    reg_covar: float = 1e-6,
    log: Optional[BoundLogger] = None,
) -> ClusterModel:
    """Fits a full covariance Gaussian mixture with EM.

    Components are initialised from k-means++ seeds. EM stops once the mean
    log-likelihood changes less than `tol` or after `max_iter` iterations.

    Args:
        vectors: The (PCA) vectors to cluster
        n_components: The number of mixture components
        seed: Seed of the k-means++ initialisation
        center_id: The center the vectors belong to
        tol: Convergence tolerance on the mean log-likelihood
        max_iter: Maximum number of EM iterations
        reg_covar: Value added to every covariance diagonal
        log: The logger to use

    Raises:
        ValueError: If there are fewer vectors than components

    Returns:
        The fitted model without prevalence estimates
    """
    log = (log or get_logger()).bind(center_id=center_id)
    x = _as_points(vectors)
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if len(x) < n_components:
        raise ValueError(
            f"Cannot fit {n_components} components to {len(x)} vectors"
        )

    seeds, _ = kmeans_plusplus(x, n_clusters=n_components, random_state=seed)
    nearest = np.argmin(((x[:, None, :] - seeds[None]) ** 2).sum(axis=2), axis=1)
    resp = np.eye(n_components)[nearest]
    weights, means, covariances = _m_step(x, resp, reg_covar, seeds)

    history = []
    converged = False
    for _ in range(max_iter):
        log_prob = _weighted_log_prob(x, weights, means, covariances)
        log_norm = logsumexp(log_prob, axis=1)
        history.append(float(log_norm.mean()))
        resp = np.exp(log_prob - log_norm[:, None])
        weights, means, covariances = _m_step(x, resp, reg_covar, means)
        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            converged = True
            break

    log.info(
        "Fitted GMM",
        n_components=n_components,
        iterations=len(history),
        converged=converged,
        mean_log_likelihood=history[-1],
    )
    return ClusterModel(
        center_id=center_id,
        n_components=n_components,
        weights=weights.tolist(),
        means=means.tolist(),
        covariances=covariances.tolist(),
        log_likelihood=history,
        converged=converged,
    )


def log_densities(vectors: Sequence[Sequence[float]], model: ClusterModel):
    """Per component `log(weight * density)` of each vector"""
    x = _as_points(vectors)
    return _weighted_log_prob(
        x,
        np.asarray(model.weights),
        np.asarray(model.means),
        np.asarray(model.covariances),
    )


def responsibilities(
    vectors: Sequence[Sequence[float]],
    model: ClusterModel,
) -> np.ndarray:
    """Posterior component probabilities, one normalized row per vector"""
    log_prob = log_densities(vectors, model)
    return np.exp(log_prob - logsumexp(log_prob, axis=1, keepdims=True))


def assign_cluster(v: Sequence[float], model: ClusterModel) -> int:
    """The component with the highest posterior (lowest id on ties)"""
    log_prob = log_densities([v], model)[0]
    return int(np.argmax(log_prob))
