# imaging.py
"""Page images: decoding, grayscale conversion, rescaling and binarization.

Images are small frozen wrappers around row-major numpy arrays so the
descriptor modules can rely on their invariants.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from config import BINARIZE_THRESHOLD
from errors import DataError, InvalidInputError

logger = logging.getLogger(__name__)

LUMINANCE_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class GrayImage:
    """Intensities in [0,1], shape (height, width)."""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidInputError(f"GrayImage needs a non-empty 2-D array, got shape {data.shape}")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise InvalidInputError("GrayImage intensities must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class BinaryImage:
    """Black/white page; `black` is True where the pixel is black."""
    black: np.ndarray

    def __post_init__(self):
        black = np.asarray(self.black, dtype=bool)
        if black.ndim != 2 or black.shape[0] < 1 or black.shape[1] < 1:
            raise InvalidInputError(f"BinaryImage needs a non-empty 2-D array, got shape {black.shape}")
        object.__setattr__(self, "black", black)

    @property
    def width(self):
        return self.black.shape[1]

    @property
    def height(self):
        return self.black.shape[0]

    def to_gray(self):
        """White -> 1.0, black -> 0.0."""
        return GrayImage((~self.black).astype(np.float64))


def to_grayscale(rgb_image):
    """Standard luminance of an (H, W, 3) array with channels in [0,1]."""
    rgb = np.asarray(rgb_image, dtype=np.float64)
    if rgb.size == 0:
        raise InvalidInputError("Cannot convert an empty image to grayscale")
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InvalidInputError(f"Expected an (H, W, 3) image, got shape {rgb.shape}")
    return GrayImage(np.clip(rgb @ LUMINANCE_WEIGHTS, 0.0, 1.0))


def binarize(gray, threshold=BINARIZE_THRESHOLD):
    """Pixels with intensity >= threshold become white."""
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"threshold must lie in (0, 1), got {threshold}")
    return BinaryImage(gray.data < threshold)


def _scaled_size(width, height, max_pixels):
    factor = math.sqrt(max_pixels / (width * height))
    new_w = max(1, math.floor(width * factor))
    new_h = max(1, math.floor(height * factor))
    # the min-1 clamp can overshoot on extreme aspect ratios
    if new_w * new_h > max_pixels:
        if new_w >= new_h:
            new_w = max(1, max_pixels // new_h)
        else:
            new_h = max(1, max_pixels // new_w)
    return new_w, new_h


def _resize_bilinear(data, new_w, new_h):
    resized = Image.fromarray(data.astype(np.float32)).resize(
        (new_w, new_h), Image.Resampling.BILINEAR
    )
    return np.clip(np.asarray(resized, dtype=np.float64), 0.0, 1.0)


def downscale_to_max_pixels(img, max_pixels):
    """
    Shrinks an image so that width*height <= max_pixels, keeping the aspect ratio.

    Images already small enough are returned unchanged (no upscaling). A
    BinaryImage is resampled as {0,1} intensities and re-thresholded at 0.5.
    """
    if max_pixels < 1:
        raise InvalidInputError(f"max_pixels must be >= 1, got {max_pixels}")
    if img.width * img.height <= max_pixels:
        return img
    new_w, new_h = _scaled_size(img.width, img.height, max_pixels)
    logger.debug("Downscaling %dx%d -> %dx%d", img.width, img.height, new_w, new_h)
    if isinstance(img, BinaryImage):
        return binarize(GrayImage(_resize_bilinear(img.to_gray().data, new_w, new_h)), 0.5)
    return GrayImage(_resize_bilinear(img.data, new_w, new_h))


def load_image(path):
    """Decodes PNG/JPEG/TIFF into a GrayImage, normalizing by the source bit depth."""
    try:
        with Image.open(path) as pil_image:
            pil_image.load()
            mode = pil_image.mode
            if mode.startswith("I;16") or mode == "I":
                data = np.asarray(pil_image, dtype=np.float64)
                return GrayImage(np.clip(data / 65535.0, 0.0, 1.0))
            if mode == "F":
                return GrayImage(np.clip(np.asarray(pil_image, dtype=np.float64), 0.0, 1.0))
            if mode in ("1", "L"):
                return GrayImage(np.asarray(pil_image.convert("L"), dtype=np.float64) / 255.0)
            rgb = np.asarray(pil_image.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as e:
        raise DataError(f"Cannot decode image '{path}': {e}") from e
    return to_grayscale(rgb)
