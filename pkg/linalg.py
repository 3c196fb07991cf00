# linalg.py
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from errors import InvalidInputError

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10


@dataclass(frozen=True)
class PCAModel:
    """Mean, orthonormal component rows and their variances (descending)."""
    mean: np.ndarray
    components: np.ndarray
    explained_variances: np.ndarray

    @property
    def in_dim(self):
        return self.components.shape[1]

    @property
    def out_dim(self):
        return self.components.shape[0]


def fit_pca(data, out_dim):
    """
    Principal components by eigendecomposition of the sample covariance.

    When there are fewer samples than dimensions the (n x n) Gram matrix is
    decomposed instead. No whitening. Each component is signed so that its
    largest-magnitude entry is positive.
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidInputError(f"PCA needs an (n >= 2, D) matrix, got shape {X.shape}")
    n, dim = X.shape
    if out_dim < 1 or out_dim > min(n - 1, dim):
        raise InvalidInputError(
            f"out_dim={out_dim} exceeds min(n - 1, D) = {min(n - 1, dim)}"
        )
    mean = X.mean(axis=0)
    centered = X - mean
    if n < dim:
        gram = centered @ centered.T / (n - 1)
        eigvals, eigvecs = sla.eigh(gram)
    else:
        cov = centered.T @ centered / (n - 1)
        eigvals, eigvecs = sla.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]

    top = eigvals[0] if eigvals.size else 0.0
    rank = int(np.sum(eigvals > RANK_TOL * max(top, np.finfo(float).tiny)))
    if out_dim > rank:
        raise InvalidInputError(
            f"Requested {out_dim} components but the data only has rank {rank}"
        )

    if n < dim:
        # map Gram eigenvectors back to feature space: u = X^T v / sqrt((n-1) * lambda)
        vecs = centered.T @ eigvecs[:, :out_dim]
        vecs /= np.sqrt((n - 1) * eigvals[:out_dim])
        components = vecs.T
    else:
        components = eigvecs[:, :out_dim].T.copy()

    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(out_dim), pivots])
    signs[signs == 0] = 1.0
    components *= signs[:, None]
    logger.debug("PCA %d -> %d dims, kept variance %.4g of %.4g",
                 dim, out_dim, eigvals[:out_dim].sum(), eigvals.sum())
    return PCAModel(mean=mean, components=components, explained_variances=eigvals[:out_dim].copy())


def pca_project(x, model):
    """components . (x - mean) for one vector or each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.in_dim:
        raise InvalidInputError(f"PCA expects dimension {model.in_dim}, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


def l2_normalize(x, axis=-1):
    """Unit L2 norm along `axis`; all-zero vectors stay zero."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.sqrt(np.sum(x * x, axis=axis, keepdims=True))
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def power_normalize(x):
    """Signed square root, component-wise."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.sqrt(np.abs(x))
