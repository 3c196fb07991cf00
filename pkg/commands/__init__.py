# commands/__init__.py
"""One module per CLI command.

Each module exposes NAME, HELP, add_arguments(parser) and run(args, settings),
and may map its own flags onto settings keys through OVERRIDES.
"""
import logging

import numpy as np

from errors import DataError
from storage import load_featureset

logger = logging.getLogger(__name__)


def load_labeled(path):
    """Loads a FeatureSet that must carry labels."""
    features = load_featureset(path)
    if features.labels is None:
        raise DataError(f"'{path}' has no labels")
    return features


def holdout(features, fraction, seed):
    """Seeded (train, validation) row split; fraction 0 gives no validation set."""
    if fraction <= 0:
        return features, None
    if not 0 < fraction < 1:
        raise DataError(f"validation fraction must lie in (0, 1), got {fraction}")
    perm = np.random.default_rng([seed, features.n]).permutation(features.n)
    n_val = max(1, int(round(fraction * features.n)))
    return features.subset(np.sort(perm[n_val:])), features.subset(np.sort(perm[:n_val]))


def check_input_hash(model_meta, features, model_path, features_path):
    """Classifier models remember the FeatureSet hash they were trained on."""
    expected = model_meta.get("input_hash")
    if expected is not None and expected != features.config_hash:
        raise DataError(
            f"'{model_path}' was trained on {model_meta.get('input_descriptor')} features with hash "
            f"{expected}, '{features_path}' has {features.config_hash}"
        )
