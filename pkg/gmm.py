# gmm.py
"""Diagonal-covariance Gaussian mixture: the visual vocabulary.

EM runs over fixed-size chunks of the data. Chunk statistics may be computed
on a thread pool but are always summed in chunk order, so a given seed
produces the same model whatever the thread count.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import KMeans

from config import (
    DEFAULT_SEED, GMM_CHUNK_SIZE, GMM_KMEANS_ITERS, GMM_MAX_ITERS, GMM_REL_TOL,
    GMM_VARIANCE_FLOOR, thread_count,
)
from errors import InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
EMPTY_COMPONENT_MASS = 1e-8


@dataclass(frozen=True)
class DiagonalGMM:
    weights: np.ndarray    # (N,)
    means: np.ndarray      # (N, D)
    variances: np.ndarray  # (N, D), squared standard deviations
    log_likelihood_history: tuple = field(default=(), compare=False)

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]


@dataclass(frozen=True)
class EMConfig:
    max_iters: int = GMM_MAX_ITERS
    rel_tol: float = GMM_REL_TOL
    variance_floor: float = GMM_VARIANCE_FLOOR
    seed: int = DEFAULT_SEED
    kmeans_iters: int = GMM_KMEANS_ITERS
    chunk_size: int = GMM_CHUNK_SIZE
    threads: int = 0  # 0: take DOCREP_THREADS


def _check_dim(X, gmm):
    if X.shape[-1] != gmm.dim:
        raise InvalidInputError(f"GMM has dimension {gmm.dim}, got {X.shape[-1]}")


def _log_joint(X, gmm):
    """(T, N) matrix of log w_n + log N(x_t | mu_n, diag var_n)."""
    inv_var = 1.0 / gmm.variances
    log_norm = -0.5 * (gmm.dim * LOG_2PI + np.sum(np.log(gmm.variances), axis=1))
    # expanded square: sum_d (x^2 - 2 x mu + mu^2) / var
    quad = (
        (X * X) @ inv_var.T
        - 2.0 * X @ (gmm.means * inv_var).T
        + np.sum(gmm.means * gmm.means * inv_var, axis=1)
    )
    return np.log(gmm.weights) + log_norm - 0.5 * quad


def log_component_density(x, gmm, n):
    """log N(x | mu_n, diag var_n) computed directly in the log domain."""
    x = np.asarray(x, dtype=np.float64)
    _check_dim(x, gmm)
    diff = x - gmm.means[n]
    var = gmm.variances[n]
    return float(-0.5 * (gmm.dim * LOG_2PI + np.sum(np.log(var)) + np.sum(diff * diff / var)))


def posteriors(x, gmm):
    """Component posteriors gamma_n(x) for one vector (N,) or each row (T, N)."""
    x = np.asarray(x, dtype=np.float64)
    _check_dim(x, gmm)
    single = x.ndim == 1
    X = x[None, :] if single else x
    log_joint = _log_joint(X, gmm)
    gamma = np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))
    return gamma[0] if single else gamma


def log_likelihood(data, gmm):
    """Average per-point log-likelihood of the data under the mixture."""
    X = np.asarray(data, dtype=np.float64)
    _check_dim(X, gmm)
    return float(np.mean(logsumexp(_log_joint(X, gmm), axis=1)))


# =============================================================================
# Initialization
# =============================================================================
def _kmeans_init(X, k, config, floor):
    """Starting mixture from k-means++ / Lloyd clusters with per-cluster variances."""
    kmeans = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=max(config.kmeans_iters, 1),
                    random_state=config.seed).fit(X)
    centers = kmeans.cluster_centers_.astype(np.float64)
    labels = kmeans.labels_
    global_var = np.maximum(X.var(axis=0), floor)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    variances = np.tile(global_var, (k, 1))
    for j in range(k):
        members = X[labels == j]
        if len(members) > 1:
            variances[j] = np.maximum(members.var(axis=0), floor)
    weights = np.maximum(counts, 1.0)
    return DiagonalGMM(weights / weights.sum(), centers, variances)


# =============================================================================
# EM
# =============================================================================
def _chunk_stats(X, gmm):
    log_joint = _log_joint(X, gmm)
    log_px = logsumexp(log_joint, axis=1)
    gamma = np.exp(log_joint - log_px[:, None])
    worst = int(np.argmin(log_px))
    return (
        gamma.sum(axis=0),
        gamma.T @ X,
        gamma.T @ (X * X),
        float(log_px.sum()),
        worst,
        float(log_px[worst]),
    )


def _e_step(X, gmm, chunks, pool):
    """Sufficient statistics summed in chunk order."""
    jobs = [X[start:stop] for start, stop in chunks]
    results = pool.map(lambda part: _chunk_stats(part, gmm), jobs) if pool else map(
        lambda part: _chunk_stats(part, gmm), jobs
    )
    s0 = np.zeros(gmm.n_components)
    s1 = np.zeros_like(gmm.means)
    s2 = np.zeros_like(gmm.means)
    total = 0.0
    worst_index, worst_value = 0, np.inf
    for (start, _), (c0, c1, c2, ll, worst, value) in zip(chunks, results):
        s0 += c0
        s1 += c1
        s2 += c2
        total += ll
        if value < worst_value:
            worst_index, worst_value = start + worst, value
    return s0, s1, s2, total / X.shape[0], worst_index


def _m_step(X, s0, s1, s2, floor, global_var, worst_index):
    n_points = X.shape[0]
    empty = s0 < EMPTY_COMPONENT_MASS
    safe = np.where(empty, 1.0, s0)
    means = s1 / safe[:, None]
    variances = np.maximum(s2 / safe[:, None] - means * means, floor)
    weights = s0 / n_points
    if np.any(empty):
        # re-seed starved components on the least likely point
        for j in np.flatnonzero(empty):
            logger.warning("GMM component %d is empty; re-seeding at point %d", j, worst_index)
            means[j] = X[worst_index]
            variances[j] = global_var
            weights[j] = 1.0 / n_points
        weights = weights / weights.sum()
    return DiagonalGMM(weights, means, variances)


def fit_em(data, n_components, config=None):
    """
    Fits a diagonal GMM by EM, initialized from k-means++ / Lloyd iterations.

    Stops after `max_iters` or when the relative gain of the average
    log-likelihood drops below `rel_tol`. The per-iteration average
    log-likelihood is kept in `log_likelihood_history`.
    """
    config = config or EMConfig()
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError(f"EM needs a (T, D) matrix, got shape {X.shape}")
    if n_components < 1 or n_components > X.shape[0]:
        raise InvalidInputError(f"Cannot fit {n_components} components to {X.shape[0]} points")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("EM data contains non-finite values")

    data_var = X.var(axis=0)
    floor = max(config.variance_floor * float(data_var.mean()), 1e-12)
    global_var = np.maximum(data_var, floor)
    gmm = _kmeans_init(X, n_components, config, floor)

    chunks = [(s, min(s + config.chunk_size, X.shape[0])) for s in range(0, X.shape[0], config.chunk_size)]
    threads = config.threads or thread_count()
    history = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for iteration in range(config.max_iters):
            s0, s1, s2, avg_ll, worst_index = _e_step(X, gmm, chunks, pool)
            if not np.isfinite(avg_ll):
                raise NumericalError(f"EM log-likelihood became non-finite at iteration {iteration}")
            history.append(avg_ll)
            logger.debug("EM iteration %d: average log-likelihood %.10f", iteration, avg_ll)
            if len(history) > 1:
                gain = history[-1] - history[-2]
                if gain < config.rel_tol * abs(history[-2]):
                    break
            gmm = _m_step(X, s0, s1, s2, floor, global_var, worst_index)
    finally:
        if pool is not None:
            pool.shutdown()
    logger.info("EM fitted %d components on %d points in %d iterations (avg LL %.6f)",
                n_components, X.shape[0], len(history), history[-1] if history else float("nan"))
    return DiagonalGMM(gmm.weights, gmm.means, gmm.variances, tuple(history))
