# fisher.py
"""Fisher-Vector encoding of local descriptor sets.

Memory layout of a raw vector: the mean gradients of components 1..N (each
a contiguous block of D dims) followed by the variance gradients of
components 1..N. Weight gradients are not part of the encoding. The Fisher
information normalization is carried by the 1/sqrt(w_n) and
1/sqrt(2 w_n) factors.
"""
import logging

import numpy as np

from config import FV_RENORMALIZE_GRID
from errors import InvalidInputError
from gmm import posteriors
from linalg import l2_normalize, pca_project, power_normalize

logger = logging.getLogger(__name__)

FV_CHUNK_SIZE = 8192


def fv_dim(gmm, grid=1):
    return grid * grid * 2 * gmm.n_components * gmm.dim


def fv_raw(descriptors, gmm):
    """
    Normalized log-likelihood gradients w.r.t. the means and standard deviations.

    An empty descriptor set gives the zero vector.
    """
    X = np.asarray(descriptors, dtype=np.float64)
    if X.size == 0:
        return np.zeros(2 * gmm.n_components * gmm.dim)
    if X.shape[-1] != gmm.dim:
        raise InvalidInputError(f"descriptors have dimension {X.shape[-1]}, GMM expects {gmm.dim}")
    X = X.reshape(-1, gmm.dim)
    T = X.shape[0]
    s0 = np.zeros(gmm.n_components)
    s1 = np.zeros((gmm.n_components, gmm.dim))
    s2 = np.zeros((gmm.n_components, gmm.dim))
    for start in range(0, T, FV_CHUNK_SIZE):
        part = X[start:start + FV_CHUNK_SIZE]
        gamma = posteriors(part, gmm)
        s0 += gamma.sum(axis=0)
        s1 += gamma.T @ part
        s2 += gamma.T @ (part * part)

    means = gmm.means
    sigma = np.sqrt(gmm.variances)
    w = gmm.weights[:, None]
    s0 = s0[:, None]
    # sum_t g (x - mu) and sum_t g (x - mu)^2 from the moments
    first = s1 - means * s0
    second = s2 - 2.0 * means * s1 + means * means * s0
    grad_mu = first / sigma / (T * np.sqrt(w))
    grad_sigma = (second / gmm.variances - s0) / (T * np.sqrt(2.0 * w))
    return np.concatenate([grad_mu.ravel(), grad_sigma.ravel()])


def fv_finalize(raw):
    """Power normalization followed by L2 normalization; zero stays zero."""
    return l2_normalize(power_normalize(raw))


def grid_cells(positions, grid):
    """Row-major cell index of each (norm_x, norm_y) position."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    cx = np.clip(np.floor(positions[:, 0] * grid).astype(int), 0, grid - 1)
    cy = np.clip(np.floor(positions[:, 1] * grid).astype(int), 0, grid - 1)
    return cy * grid + cx


def fv_grid_encode(descriptors, positions, gmm, grid, renormalize=FV_RENORMALIZE_GRID):
    """
    Concatenates per-cell Fisher-Vectors over a g x g grid.

    Each cell is finalized on its own; empty cells contribute zero blocks.
    With more than one cell the concatenation is re-L2-normalized when
    `renormalize` is set. For g = 1 the result is exactly
    fv_finalize(fv_raw(descriptors)).
    """
    if grid < 1:
        raise InvalidInputError(f"grid must be >= 1, got {grid}")
    X = np.asarray(descriptors, dtype=np.float64).reshape(-1, gmm.dim)
    if X.shape[0] == 0:
        return np.zeros(fv_dim(gmm, grid))
    if grid == 1:
        return fv_finalize(fv_raw(X, gmm))
    cells = grid_cells(positions, grid)
    if cells.shape[0] != X.shape[0]:
        raise InvalidInputError("descriptors and positions differ in length")
    block = 2 * gmm.n_components * gmm.dim
    out = np.zeros(grid * grid * block)
    for cell in np.unique(cells):
        out[cell * block:(cell + 1) * block] = fv_finalize(fv_raw(X[cells == cell], gmm))
    return l2_normalize(out) if renormalize else out


def fv_encode(local_descriptors, gmm, grid, renormalize=FV_RENORMALIZE_GRID):
    """Encodes an (T, 80) local descriptor matrix whose columns 77-78 hold (norm_x, norm_y)."""
    local_descriptors = np.asarray(local_descriptors, dtype=np.float64).reshape(-1, gmm.dim)
    positions = local_descriptors[:, -3:-1]
    return fv_grid_encode(local_descriptors, positions, gmm, grid, renormalize)


def fv_pca_reduce(fv, pca):
    """PCA projection of a finalized FV followed by L2 normalization."""
    return l2_normalize(pca_project(fv, pca))
