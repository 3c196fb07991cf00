# synth_docs.py
"""Synthetic template corpus: one page layout per class, noisy instances."""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from config import (
    DEFAULT_SEED, SYNTH_BLOCK_DROPOUT, SYNTH_BLOCK_JITTER, SYNTH_FLIP_PROB, SYNTH_MAX_SHIFT,
    SYNTH_PAGE_HEIGHT, SYNTH_PAGE_WIDTH, SYNTH_THICKNESS_JITTER,
)
from data_loader import records_to_manifest, save_manifest
from errors import DataError, InvalidInputError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
MARGIN = 30
BLOCK_KINDS = ("text", "text", "rule", "rect")


@dataclass(frozen=True)
class NoiseConfig:
    flip_prob: float = SYNTH_FLIP_PROB
    max_shift: float = SYNTH_MAX_SHIFT         # fraction of the page side
    thickness_jitter: int = SYNTH_THICKNESS_JITTER
    block_jitter: float = SYNTH_BLOCK_JITTER   # per-block shift, fraction of the page side
    block_dropout: float = SYNTH_BLOCK_DROPOUT

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 0.5:
            raise InvalidInputError(f"flip probability must lie in [0, 0.5], got {self.flip_prob}")
        if not 0.0 <= self.block_dropout < 1.0:
            raise InvalidInputError(f"block dropout must lie in [0, 1), got {self.block_dropout}")
        if self.max_shift < 0 or self.block_jitter < 0 or self.thickness_jitter < 0:
            raise InvalidInputError("shift, jitter and thickness settings must be non-negative")

    @classmethod
    def off(cls):
        return cls(0.0, 0.0, 0, 0.0, 0.0)


@dataclass(frozen=True)
class Block:
    kind: str       # "text", "rule" or "rect"
    x0: int
    y0: int
    x1: int
    y1: int
    stroke: int = 1
    words: tuple = ()  # text only: per line, tuple of (start, end) x spans
    pitch: int = 0


def _text_block(rng, x0, x1, y0):
    n_lines = int(rng.integers(2, 9))
    pitch = int(rng.integers(12, 21))
    stroke = int(rng.integers(4, 8))
    lines = []
    for _ in range(n_lines):
        spans, x = [], x0
        line_end = x1 - int(rng.integers(0, (x1 - x0) // 3 + 1))
        while x < line_end:
            word = int(rng.integers(12, 60))
            spans.append((x, min(x + word, line_end)))
            x += word + int(rng.integers(6, 12))
        lines.append(tuple(spans))
    return Block("text", x0, y0, x1, y0 + n_lines * pitch, stroke, tuple(lines), pitch)


def make_template(rng, width=SYNTH_PAGE_WIDTH, height=SYNTH_PAGE_HEIGHT):
    """Random stack of text blocks, horizontal rules and filled rectangles."""
    blocks = []
    y = MARGIN
    while y < height - 2 * MARGIN:
        kind = BLOCK_KINDS[int(rng.integers(len(BLOCK_KINDS)))]
        x0 = int(rng.integers(MARGIN, width // 3))
        x1 = int(rng.integers(2 * width // 3, width - MARGIN))
        if kind == "text":
            block = _text_block(rng, x0, x1, y)
        elif kind == "rule":
            stroke = int(rng.integers(1, 5))
            block = Block("rule", x0, y, x1, y + stroke, stroke)
        else:
            block = Block("rect", x0, y, x1, y + int(rng.integers(20, 121)))
        if block.y1 > height - MARGIN:
            break
        blocks.append(block)
        y = block.y1 + int(rng.integers(10, 41))
    return tuple(blocks)


def _fill(page, x0, y0, x1, y1):
    h, w = page.shape
    x0, x1 = max(0, x0), min(w, x1)
    y0, y1 = max(0, y0), min(h, y1)
    if x1 > x0 and y1 > y0:
        page[y0:y1, x0:x1] = True


def render_page(template, rng, noise, width=SYNTH_PAGE_WIDTH, height=SYNTH_PAGE_HEIGHT):
    """Boolean page (True = black) of one noisy template instance."""
    page = np.zeros((height, width), dtype=bool)
    max_dx = int(round(noise.max_shift * width))
    max_dy = int(round(noise.max_shift * height))
    dx = int(rng.integers(-max_dx, max_dx + 1))
    dy = int(rng.integers(-max_dy, max_dy + 1))
    jx = int(round(noise.block_jitter * width))
    jy = int(round(noise.block_jitter * height))
    for block in template:
        # every block draws the same random numbers whether or not it is kept
        dropped = rng.random() < noise.block_dropout
        bx = dx + int(rng.integers(-jx, jx + 1))
        by = dy + int(rng.integers(-jy, jy + 1))
        delta = int(rng.integers(-noise.thickness_jitter, noise.thickness_jitter + 1))
        if dropped:
            continue
        if block.kind == "text":
            stroke = max(1, block.stroke + delta)
            for k, spans in enumerate(block.words):
                top = block.y0 + k * block.pitch + by
                for start, end in spans:
                    _fill(page, start + bx, top, end + bx, top + stroke)
        elif block.kind == "rule":
            _fill(page, block.x0 + bx, block.y0 + by, block.x1 + bx, block.y0 + by + max(1, block.stroke + delta))
        else:
            grow = max(delta, -((block.y1 - block.y0) // 2 - 1))
            _fill(page, block.x0 + bx - grow, block.y0 + by - grow, block.x1 + bx + grow, block.y1 + by + grow)
    if noise.flip_prob > 0:
        page ^= rng.random(page.shape) < noise.flip_prob
    return page


def synth_docs(out_dir, n_classes, per_class, noise=None, seed=DEFAULT_SEED,
               width=SYNTH_PAGE_WIDTH, height=SYNTH_PAGE_HEIGHT):
    """
    Writes a labeled corpus of binary PNG pages plus manifest.jsonl.

    Class c uses the template drawn from default_rng([seed, c]); instance i of
    class c is perturbed with default_rng([seed, c, i]), so a seed fixes
    every byte of the corpus.

    Returns:
        Manifest
    """
    if n_classes < 2:
        raise InvalidInputError(f"a corpus needs at least 2 classes, got {n_classes}")
    if per_class < 1:
        raise InvalidInputError(f"per_class must be >= 1, got {per_class}")
    noise = noise or NoiseConfig()
    out_dir = Path(out_dir)
    records = []
    try:
        for c in range(n_classes):
            label = f"class{c:02d}"
            template = make_template(np.random.default_rng([seed, c]), width, height)
            (out_dir / label).mkdir(parents=True, exist_ok=True)
            for i in range(per_class):
                page = render_page(template, np.random.default_rng([seed, c, i]), noise, width, height)
                relative = f"{label}/doc{c:02d}_{i:03d}.png"
                Image.fromarray(np.where(page, 0, 255).astype(np.uint8)).convert("1").save(out_dir / relative)
                records.append({"id": f"c{c:02d}_{i:03d}", "path": relative, "label": label})
    except OSError as e:
        raise DataError(f"Cannot write corpus to '{out_dir}': {e}") from e
    manifest = records_to_manifest(records, out_dir, str(out_dir))
    save_manifest(manifest, out_dir / MANIFEST_NAME)
    logger.info("Wrote %d pages of %d classes to %s", len(records), n_classes, out_dir)
    return manifest
