# patchdesc.py
"""Dense multi-scale SIFT-like local descriptors.

A descriptor is a 4x4 grid of spatial cells times 8 orientation bins,
laid out as (cell_row, cell_col, orientation). Gradients are central
differences; each pixel votes bilinearly into the two nearest cells along
each axis and linearly into the two nearest orientation bins, weighted by
its gradient magnitude and a Gaussian window with sigma = size / 2.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from config import SIFT_MIN_ENERGY, SIFT_PCA_DIM, SIFT_SCALES, SIFT_STRIDE
from errors import InvalidInputError
from linalg import fit_pca, pca_project

logger = logging.getLogger(__name__)

N_CELLS = 4
N_ORIENTATIONS = 8
SIFT_DIM = N_CELLS * N_CELLS * N_ORIENTATIONS
CLAMP = 0.2


@dataclass(frozen=True)
class Patch:
    center_x: float
    center_y: float
    size: int

    @property
    def left(self):
        return int(round(self.center_x - self.size / 2))

    @property
    def top(self):
        return int(round(self.center_y - self.size / 2))


@dataclass(frozen=True)
class LocalDescriptor:
    values: np.ndarray  # PCA projection followed by (norm_x, norm_y, norm_s)
    norm_x: float
    norm_y: float
    norm_s: float


@dataclass(frozen=True)
class PatchConfig:
    scales: tuple = SIFT_SCALES
    stride: int = SIFT_STRIDE
    min_energy: float = SIFT_MIN_ENERGY
    pca_dim: int = SIFT_PCA_DIM

    def __post_init__(self):
        scales = tuple(int(s) for s in self.scales)
        if not scales or min(scales) < 2:
            raise InvalidInputError(f"patch scales must be non-empty and >= 2, got {self.scales}")
        if self.stride < 1:
            raise InvalidInputError(f"stride must be >= 1, got {self.stride}")
        object.__setattr__(self, "scales", scales)

    @property
    def min_scale(self):
        return min(self.scales)

    @property
    def max_scale(self):
        return max(self.scales)


def dense_grid(width, height, scales=SIFT_SCALES, stride=SIFT_STRIDE):
    """
    Patches on a regular stride grid, scale by scale, rows then columns.

    Patches always lie inside the image; scales larger than either image
    side are skipped, so a page smaller than every scale gives an empty list.
    """
    if stride < 1:
        raise InvalidInputError(f"stride must be >= 1, got {stride}")
    if not scales:
        raise InvalidInputError("at least one patch scale is required")
    patches = []
    for size in scales:
        if size > width or size > height:
            continue
        for top in range(0, height - size + 1, stride):
            for left in range(0, width - size + 1, stride):
                patches.append(Patch(left + size / 2, top + size / 2, int(size)))
    return patches


# =============================================================================
# Gradient histograms
# =============================================================================
def _orientation_maps(data):
    """(H, W, 8) magnitude-weighted orientation votes of a 2-D intensity array."""
    if min(data.shape) < 2:
        return np.zeros(data.shape + (N_ORIENTATIONS,))
    dy, dx = np.gradient(data)
    magnitude = np.hypot(dx, dy)
    theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
    position = theta * (N_ORIENTATIONS / (2.0 * np.pi))
    lower = np.floor(position).astype(int) % N_ORIENTATIONS
    frac = position - np.floor(position)
    maps = np.zeros(data.shape + (N_ORIENTATIONS,))
    rows, cols = np.indices(data.shape)
    np.add.at(maps, (rows, cols, lower), magnitude * (1.0 - frac))
    np.add.at(maps, (rows, cols, (lower + 1) % N_ORIENTATIONS), magnitude * frac)
    return maps


@lru_cache(maxsize=32)
def _axis_weights(size):
    """(size, 4) bilinear cell weights times the 1-D Gaussian window."""
    coords = np.arange(size) + 0.5
    cell = size / N_CELLS
    u = coords / cell - 0.5
    lower = np.floor(u).astype(int)
    frac = u - lower
    weights = np.zeros((size, N_CELLS))
    for offset, share in ((0, 1.0 - frac), (1, frac)):
        idx = lower + offset
        valid = (idx >= 0) & (idx < N_CELLS)
        weights[np.flatnonzero(valid), idx[valid]] += share[valid]
    sigma = size / 2.0
    gauss = np.exp(-((coords - size / 2.0) ** 2) / (2.0 * sigma * sigma))
    weights *= gauss[:, None]
    weights.setflags(write=False)
    return weights


def _raw_histograms(windows, size):
    """Un-normalized descriptors of (n, 8, size, size) orientation windows."""
    w = _axis_weights(size)
    by_x = np.tensordot(windows, w, axes=([3], [0]))   # (n, o, y, cx)
    by_xy = np.tensordot(by_x, w, axes=([2], [0]))     # (n, o, cx, cy)
    return by_xy.transpose(0, 3, 2, 1).reshape(windows.shape[0], SIFT_DIM)


def normalize_sift(raw):
    """L2-normalize, clamp at 0.2, re-normalize; rows with zero energy stay zero."""
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    out = np.zeros_like(raw)
    norms = np.linalg.norm(raw, axis=1)
    live = norms > 0
    if np.any(live):
        clipped = np.minimum(raw[live] / norms[live, None], CLAMP)
        out[live] = clipped / np.linalg.norm(clipped, axis=1, keepdims=True)
    return out


def _patch_raw(gray, patch):
    left, top, size = patch.left, patch.top, patch.size
    if left < 0 or top < 0 or left + size > gray.width or top + size > gray.height:
        raise InvalidInputError(f"patch {patch} outside a {gray.width}x{gray.height} image")
    # one pixel of context so border gradients are central like on the full page
    x0, y0 = max(left - 1, 0), max(top - 1, 0)
    x1, y1 = min(left + size + 1, gray.width), min(top + size + 1, gray.height)
    maps = _orientation_maps(gray.data[y0:y1, x0:x1])
    window = maps[top - y0:top - y0 + size, left - x0:left - x0 + size]
    return _raw_histograms(window.transpose(2, 0, 1)[None], size)[0]


def sift128(gray, patch):
    """128-dim descriptor of one patch; constant patches give the zero vector."""
    return normalize_sift(_patch_raw(gray, patch))[0]


def extract_local_descriptors(gray, config=None):
    """
    Dense SIFT over a whole page.

    Returns:
        tuple: (descriptors (T, 128), geometry (T, 3) of center_x, center_y, size),
        with low-energy patches already discarded.
    """
    config = config or PatchConfig()
    maps = _orientation_maps(gray.data)
    raws, geometry = [], []
    for size in config.scales:
        if size > gray.width or size > gray.height:
            continue
        lefts = np.arange(0, gray.width - size + 1, config.stride)
        tops = np.arange(0, gray.height - size + 1, config.stride)
        # (H-s+1, W-s+1, 8, s, s) view; rows of patches are gathered one at a time
        view = sliding_window_view(maps, (size, size), axis=(0, 1))
        for top in tops:
            raws.append(_raw_histograms(view[top, lefts], size))
            geometry.append(np.column_stack([
                lefts + size / 2.0,
                np.full(len(lefts), top + size / 2.0),
                np.full(len(lefts), float(size)),
            ]))
    if not raws:
        return np.empty((0, SIFT_DIM)), np.empty((0, 3))
    raw = np.concatenate(raws)
    geometry = np.concatenate(geometry)
    energy = np.sum(raw * raw, axis=1)
    keep = energy >= config.min_energy
    dropped = int(np.sum(~keep))
    if dropped:
        logger.debug("Dropped %d of %d low-energy patches", dropped, raw.shape[0])
    return normalize_sift(raw[keep]), geometry[keep]


# =============================================================================
# PCA + geometry
# =============================================================================
def fit_descriptor_pca(sample, out_dim=SIFT_PCA_DIM):
    """PCA over a descriptor sample; all-zero descriptors are left out."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 2:
        raise InvalidInputError(f"expected a (n, 128) sample, got shape {sample.shape}")
    sample = sample[np.any(sample != 0, axis=1)]
    if sample.shape[0] <= out_dim:
        raise InvalidInputError(
            f"PCA to {out_dim} dims needs more than {out_dim} non-zero descriptors, got {sample.shape[0]}"
        )
    return fit_pca(sample, out_dim)


def _geometry_columns(centers_x, centers_y, sizes, width, height, min_scale, max_scale):
    span = np.log2(max_scale / min_scale) if max_scale > min_scale else 0.0
    norm_s = np.log2(np.asarray(sizes, dtype=np.float64) / min_scale) / span if span else \
        np.zeros(np.shape(sizes))
    return np.column_stack([
        np.asarray(centers_x, dtype=np.float64) / width,
        np.asarray(centers_y, dtype=np.float64) / height,
        norm_s,
    ])


def project_augment(desc, patch, width, height, pca, scales=SIFT_SCALES):
    """PCA projection of one descriptor plus its normalized (x, y, s)."""
    projected = pca_project(desc, pca)
    geo = _geometry_columns([patch.center_x], [patch.center_y], [patch.size],
                            width, height, min(scales), max(scales))[0]
    return LocalDescriptor(np.concatenate([projected, geo]), float(geo[0]), float(geo[1]), float(geo[2]))


def project_augment_batch(descriptors, geometry, width, height, pca, scales=SIFT_SCALES):
    """Row-wise project_augment of (T, 128) descriptors and (T, 3) geometry."""
    descriptors = np.asarray(descriptors, dtype=np.float64).reshape(-1, SIFT_DIM)
    geometry = np.asarray(geometry, dtype=np.float64).reshape(-1, 3)
    if descriptors.shape[0] == 0:
        return np.empty((0, pca.out_dim + 3))
    geo = _geometry_columns(geometry[:, 0], geometry[:, 1], geometry[:, 2],
                            width, height, min(scales), max(scales))
    return np.hstack([pca_project(descriptors, pca), geo])
