# config.py
import os

from errors import UsageError

# --- Imaging ---
# Larger pages are downscaled to this many pixels; smaller ones are left alone.
MAX_PIXELS = 250_000
BINARIZE_THRESHOLD = 0.5

# --- RunLength descriptor ---
RL_BINS = 11  # Q = q + 2
RL_PYRAMID_LEVELS = (1, 2, 4, 6, 8)
RL_NORMALIZATION = "cell"  # "cell" or "global"

# --- Dense local descriptors ---
SIFT_SCALES = (24, 34, 48, 68, 96)  # patch sides, roughly sqrt(2) apart
SIFT_STRIDE = 8
SIFT_MIN_ENERGY = 1e-6  # patches below this gradient energy are dropped
SIFT_PCA_DIM = 77

# --- Visual vocabulary (GMM) ---
GMM_MAX_ITERS = 100
GMM_REL_TOL = 1e-6
GMM_VARIANCE_FLOOR = 1e-4  # fraction of the average per-dim data variance
GMM_KMEANS_ITERS = 10
GMM_CHUNK_SIZE = 4096
GMM_SAMPLE_PER_IMAGE = 2000

# --- Fisher-Vector variants: descriptor name -> (grid, gaussians) ---
FV_VARIANTS = {
    "fv4": (8, 4),
    "fv16": (4, 16),
    "fv256": (1, 256),
}
FV_RENORMALIZE_GRID = True
FV_PCA_DIM = 4096

# --- Hybrid MLP ---
MLP_HIDDEN_WIDTH = 256  # 4096 for full-size runs
MLP_HIDDEN_LAYERS = 1
MLP_DROPOUT = 0.35
MLP_LEARNING_RATE = 0.01
MLP_LR_DECAY = 0.1
MLP_LR_STEP_EPOCHS = 30
MLP_MOMENTUM = 0.9
MLP_BATCH_SIZE = 32
MLP_EPOCHS = 60
MLP_ACTIVATION_LAYER = 1

# --- Linear SVM ---
SVM_LAMBDA = 1e-4
SVM_LAMBDA_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
SVM_EPOCHS = 30

# --- Evaluation protocol ---
EVAL_REPEATS = 5
EVAL_TASKS = ("retrieval", "cluster", "ncm")
EVAL_PRECISION_AT = (1, 5)

# --- Synthetic corpus ---
SYNTH_PAGE_WIDTH = 500
SYNTH_PAGE_HEIGHT = 650
SYNTH_FLIP_PROB = 0.01
SYNTH_MAX_SHIFT = 0.03
SYNTH_THICKNESS_JITTER = 1
SYNTH_BLOCK_JITTER = 0.0
SYNTH_BLOCK_DROPOUT = 0.0

# --- Extraction ---
MAX_FAILURE_RATE = 0.10
DEFAULT_SEED = 0

# --- Report chart colours ---
CHART_COLORS = [
    "#3b82f6", "#8b5cf6", "#06d6a0", "#f59e0b",
    "#ef4444", "#84cc16", "#ec4899", "#14b8a6"
]

# --- Environment ---
THREADS_ENV = "DOCREP_THREADS"
DETERMINISTIC_ENV = "DOCREP_DETERMINISTIC"

# =============================================================================
# Key-value settings files
# =============================================================================
# Keys accepted in a settings file, mapped to the constant supplying the default.
SETTINGS_DEFAULTS = {
    "max_pixels": MAX_PIXELS,
    "binarize_threshold": BINARIZE_THRESHOLD,
    "rl_bins": RL_BINS,
    "rl_pyramid_levels": RL_PYRAMID_LEVELS,
    "rl_normalization": RL_NORMALIZATION,
    "sift_scales": SIFT_SCALES,
    "sift_stride": SIFT_STRIDE,
    "sift_min_energy": SIFT_MIN_ENERGY,
    "sift_pca_dim": SIFT_PCA_DIM,
    "gmm_max_iters": GMM_MAX_ITERS,
    "gmm_rel_tol": GMM_REL_TOL,
    "gmm_variance_floor": GMM_VARIANCE_FLOOR,
    "gmm_kmeans_iters": GMM_KMEANS_ITERS,
    "gmm_sample_per_image": GMM_SAMPLE_PER_IMAGE,
    "fv_renormalize_grid": FV_RENORMALIZE_GRID,
    "fv_pca_dim": FV_PCA_DIM,
    "mlp_hidden_width": MLP_HIDDEN_WIDTH,
    "mlp_hidden_layers": MLP_HIDDEN_LAYERS,
    "mlp_dropout": MLP_DROPOUT,
    "mlp_learning_rate": MLP_LEARNING_RATE,
    "mlp_lr_decay": MLP_LR_DECAY,
    "mlp_lr_step_epochs": MLP_LR_STEP_EPOCHS,
    "mlp_momentum": MLP_MOMENTUM,
    "mlp_batch_size": MLP_BATCH_SIZE,
    "mlp_epochs": MLP_EPOCHS,
    "mlp_activation_layer": MLP_ACTIVATION_LAYER,
    "svm_lambda": SVM_LAMBDA,
    "svm_epochs": SVM_EPOCHS,
    "eval_repeats": EVAL_REPEATS,
    "max_failure_rate": MAX_FAILURE_RATE,
    "seed": DEFAULT_SEED,
    "log_level": "WARNING",
}


def _parse_value(raw, default):
    """Parses a settings value using the type of its default."""
    raw = raw.strip()
    if isinstance(default, bool):
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, tuple):
        item_type = type(default[0]) if default else str
        return tuple(item_type(part.strip()) for part in raw.split(",") if part.strip())
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def load_settings(path=None, overrides=None):
    """
    Builds the effective settings dict: defaults, then a key-value file, then overrides.

    Args:
        path (str | Path | None): Optional settings file with `key = value` lines.
        overrides (dict | None): Already-typed values (e.g. from CLI flags); None values are ignored.

    Returns:
        dict: One entry per key in SETTINGS_DEFAULTS.
    """
    settings = dict(SETTINGS_DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as handle:
                lines = handle.readlines()
        except OSError as e:
            raise UsageError(f"Cannot read settings file '{path}': {e}") from e
        for line_no, line in enumerate(lines, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{line_no}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in SETTINGS_DEFAULTS:
                raise UsageError(f"{path}:{line_no}: unknown settings key '{key}'")
            try:
                settings[key] = _parse_value(value, SETTINGS_DEFAULTS[key])
            except ValueError as e:
                raise UsageError(f"{path}:{line_no}: bad value for '{key}': {e}") from e
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in SETTINGS_DEFAULTS:
            raise UsageError(f"Unknown settings key '{key}'")
        settings[key] = value
    return settings


def thread_count():
    """Worker threads from the environment; deterministic mode pins it to 1."""
    if os.environ.get(DETERMINISTIC_ENV, "").lower() in ("1", "true", "yes"):
        return 1
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1
