# runlength.py
"""RunLength (RL) page descriptor.

Runs of black and white pixels are collected along four directions,
log-quantized into Q bins and pooled over a spatial pyramid.  Block layout
of one region: (horizontal, vertical, diagonal, anti-diagonal) x
(black, white) x Q bins.
"""
import logging
from dataclasses import dataclass

import numpy as np

from config import MAX_PIXELS, RL_BINS, RL_NORMALIZATION, RL_PYRAMID_LEVELS
from errors import InvalidInputError

logger = logging.getLogger(__name__)

DIRECTIONS = ("horizontal", "vertical", "diagonal", "anti_diagonal")
COLORS = ("black", "white")
_SENTINEL = 2


@dataclass(frozen=True)
class RLConfig:
    n_bins: int = RL_BINS
    pyramid_levels: tuple = RL_PYRAMID_LEVELS
    max_pixels: int = MAX_PIXELS
    normalization: str = RL_NORMALIZATION

    def __post_init__(self):
        if self.n_bins < 2:
            raise InvalidInputError(f"Q must be >= 2, got {self.n_bins}")
        levels = tuple(int(n) for n in self.pyramid_levels)
        if not levels or min(levels) < 1:
            raise InvalidInputError(f"pyramid levels must be non-empty and >= 1, got {self.pyramid_levels}")
        if self.normalization not in ("cell", "global"):
            raise InvalidInputError(f"normalization must be 'cell' or 'global', got {self.normalization!r}")
        object.__setattr__(self, "pyramid_levels", levels)

    @property
    def n_cells(self):
        return sum(n * n for n in self.pyramid_levels)

    @property
    def block_dim(self):
        return len(DIRECTIONS) * len(COLORS) * self.n_bins

    @property
    def dim(self):
        return self.n_cells * self.block_dim


def quantize_run_length(length, n_bins=RL_BINS):
    """
    Log bin of a run length: [1], [2], [3-4], [5-8], ..., [>= 2^q + 1] with q = Q - 2.

    Accepts a scalar or an integer array; bin b >= 1 covers (2^(b-1), 2^b].
    """
    lengths = np.asarray(length)
    if np.any(lengths < 1):
        raise InvalidInputError("run lengths must be >= 1")
    bins = np.ceil(np.log2(lengths.astype(np.float64))).astype(np.int64)
    bins = np.minimum(bins, n_bins - 1)
    return int(bins) if bins.ndim == 0 else bins


def _line_runs(lines):
    """Lengths and colours of maximal runs along the rows of an int8 array.

    Cells holding _SENTINEL are padding; runs never cross them.
    """
    if lines.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int8)
    padded = np.concatenate(
        [lines, np.full((lines.shape[0], 1), _SENTINEL, dtype=np.int8)], axis=1
    ).ravel()
    starts = np.flatnonzero(np.concatenate([[True], padded[1:] != padded[:-1]]))
    lengths = np.diff(np.append(starts, padded.size))
    values = padded[starts]
    keep = values != _SENTINEL
    return lengths[keep], values[keep]


def _sheared(pixels, anti):
    """Lays every 45-degree diagonal of `pixels` out as one column."""
    h, w = pixels.shape
    out = np.full((h, w + h - 1), _SENTINEL, dtype=np.int8)
    rows = np.arange(h)[:, None]
    shift = rows if anti else (h - 1 - rows)
    out[rows, np.arange(w)[None, :] + shift] = pixels
    return out


def region_run_histogram(img, region, n_bins=RL_BINS):
    """
    Run-length histograms of one rectangular region.

    Args:
        img (BinaryImage): The page.
        region (tuple): (x0, y0, x1, y1), half-open pixel bounds inside the image.
        n_bins (int): Q.

    Returns:
        np.ndarray: 8*Q run counts; runs are truncated at the region boundary.
    """
    x0, y0, x1, y1 = (int(v) for v in region)
    if x0 < 0 or y0 < 0 or x1 > img.width or y1 > img.height:
        raise InvalidInputError(f"region {region} outside a {img.width}x{img.height} image")
    hist = np.zeros(len(DIRECTIONS) * len(COLORS) * n_bins, dtype=np.float64)
    if x1 <= x0 or y1 <= y0:
        return hist
    # 0 = black, 1 = white
    pixels = (~img.black[y0:y1, x0:x1]).astype(np.int8)
    views = (pixels, pixels.T, _sheared(pixels, anti=False).T, _sheared(pixels, anti=True).T)
    for d, lines in enumerate(views):
        lengths, colors = _line_runs(np.ascontiguousarray(lines))
        bins = quantize_run_length(lengths, n_bins) if lengths.size else lengths
        for c in range(len(COLORS)):
            offset = (d * len(COLORS) + c) * n_bins
            hist[offset:offset + n_bins] = np.bincount(bins[colors == c], minlength=n_bins)
    return hist


def cell_edges(size, n):
    """Cell boundaries round(i * size / n), i = 0..n, rounding halves up."""
    return np.floor(np.arange(n + 1) * size / n + 0.5).astype(int)


def _l1_sqrt(block):
    total = block.sum()
    if total <= 0:
        return np.zeros_like(block)
    return np.sqrt(block / total)


def rl_descriptor(img, config=None):
    """
    Spatial-pyramid RL descriptor of an already rescaled binary page.

    Cells are visited level by level, row-major within a level. With the
    default "cell" normalization every cell block is L1-normalized then
    square-rooted; "global" applies the same to the whole concatenation.
    """
    config = config or RLConfig()
    blocks = []
    for n in config.pyramid_levels:
        xs = cell_edges(img.width, n)
        ys = cell_edges(img.height, n)
        for row in range(n):
            for col in range(n):
                region = (xs[col], ys[row], xs[col + 1], ys[row + 1])
                blocks.append(region_run_histogram(img, region, config.n_bins))
    if config.normalization == "global":
        return _l1_sqrt(np.concatenate(blocks))
    return np.concatenate([_l1_sqrt(block) for block in blocks])
