# utils.py
import hashlib
import json
import logging
import time
from contextlib import contextmanager

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


# --- Formatting Functions ---
def format_score(value, digits=1):
    """Formats a [0,1] score as a percentage the way result tables print it."""
    if value is None or pd.isna(value):
        return "N/A"
    try:
        return f"{100.0 * float(value):.{digits}f}"
    except (ValueError, TypeError):
        return "Error"


def format_mean_std(mean, std, digits=1):
    """Formats 'mean ± std' in percentage points."""
    if mean is None or pd.isna(mean):
        return "N/A"
    if std is None or pd.isna(std):
        return format_score(mean, digits)
    return f"{format_score(mean, digits)} ± {format_score(std, digits)}"


# --- Hashing ---
def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def config_hash(settings):
    """First 16 hex chars of SHA-256 over the canonical JSON of a settings dict."""
    canonical = json.dumps(_jsonable(settings), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# --- Performance Tracker ---
@contextmanager
def stage_timer(label):
    """Logs the elapsed wall time of a pipeline stage at INFO level."""
    start = time.perf_counter()
    try:
        yield
    finally:
        logger.info("%s took %.2fs", label, time.perf_counter() - start)
