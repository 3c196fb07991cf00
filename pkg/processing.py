# processing.py
"""Per-image extraction recipes and the training-set sampling around them."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from config import FV_VARIANTS, thread_count
from data_loader import load_record_image
from errors import DataError, InvalidInputError
from fisher import fv_dim, fv_encode, fv_pca_reduce
from gmm import EMConfig, fit_em
from imaging import binarize, downscale_to_max_pixels
from linalg import fit_pca
from mlp import TrainConfig, extract_activation
from patchdesc import PatchConfig, extract_local_descriptors, fit_descriptor_pca, project_augment_batch
from runlength import RLConfig, rl_descriptor
from storage import FeatureSet, check_config_hash, load_model, model_digest
from utils import config_hash, stage_timer

logger = logging.getLogger(__name__)

DESCRIPTORS = ("rl",) + tuple(FV_VARIANTS) + ("fv256pca", "hybrid-act")
MLP_INPUTS = ("rl",) + tuple(FV_VARIANTS) + ("fv256pca",)

RL_KEYS = ("max_pixels", "binarize_threshold", "rl_bins", "rl_pyramid_levels", "rl_normalization")
LOCAL_KEYS = ("max_pixels", "sift_scales", "sift_stride", "sift_min_energy", "sift_pca_dim")


# =============================================================================
# Settings -> module configs
# =============================================================================
def rl_config(settings):
    return RLConfig(settings["rl_bins"], settings["rl_pyramid_levels"], settings["max_pixels"],
                    settings["rl_normalization"])


def patch_config(settings):
    return PatchConfig(settings["sift_scales"], settings["sift_stride"], settings["sift_min_energy"],
                       settings["sift_pca_dim"])


def em_config(settings):
    return EMConfig(max_iters=settings["gmm_max_iters"], rel_tol=settings["gmm_rel_tol"],
                    variance_floor=settings["gmm_variance_floor"], seed=settings["seed"],
                    kmeans_iters=settings["gmm_kmeans_iters"])


def train_config(settings):
    return TrainConfig(
        learning_rate=settings["mlp_learning_rate"], lr_decay=settings["mlp_lr_decay"],
        lr_step_epochs=settings["mlp_lr_step_epochs"], momentum=settings["mlp_momentum"],
        batch_size=settings["mlp_batch_size"], epochs=settings["mlp_epochs"],
        dropout_rate=settings["mlp_dropout"], seed=settings["seed"],
        hidden_width=settings["mlp_hidden_width"], hidden_layers=settings["mlp_hidden_layers"],
    )


def local_hash(settings):
    """Hash of everything that shapes the 80-dim local descriptors."""
    return config_hash({key: settings[key] for key in LOCAL_KEYS})


# =============================================================================
# Models used by extraction
# =============================================================================
@dataclass
class ExtractionModels:
    pca: object = None
    gmm: object = None
    fv_pca: object = None
    mlp: object = None
    metadata: dict = field(default_factory=dict)  # model kind -> file metadata


def load_extraction_models(pca=None, gmm=None, fv_pca=None, mlp=None):
    """Loads whichever model files were given; missing paths raise DataError naming them."""
    models = ExtractionModels()
    for kind, path, tag in (("pca", pca, "pca"), ("gmm", gmm, "gmm"), ("fv_pca", fv_pca, "pca"), ("mlp", mlp, "mlp")):
        if path is None:
            continue
        model, meta = load_model(path, expected_tag=tag)
        setattr(models, kind, model)
        models.metadata[kind] = {**meta, "path": str(path)}
    return models


def _require(models, kind, descriptor):
    model = getattr(models, kind)
    if model is None:
        flag = "--" + kind.replace("_", "-")
        raise DataError(f"descriptor '{descriptor}' needs a {kind} model ({flag})")
    return model


def descriptor_hash(settings, descriptor, models):
    """Config hash of a FeatureSet: its settings plus digests of the models it depends on."""
    if descriptor not in DESCRIPTORS:
        raise InvalidInputError(f"unknown descriptor '{descriptor}'; expected one of {DESCRIPTORS}")
    payload = {"descriptor": descriptor}
    if descriptor == "rl":
        payload["settings"] = {key: settings[key] for key in RL_KEYS}
    elif descriptor == "hybrid-act":
        mlp = _require(models, "mlp", descriptor)
        base = models.metadata["mlp"].get("input_descriptor")
        payload["base"] = descriptor_hash(settings, base, models)
        payload["mlp"] = model_digest(mlp)
        payload["layer"] = settings["mlp_activation_layer"]
    else:
        payload["local"] = local_hash(settings)
        payload["renormalize"] = settings["fv_renormalize_grid"]
        payload["pca"] = model_digest(_require(models, "pca", descriptor))
        payload["gmm"] = model_digest(_require(models, "gmm", descriptor))
        if descriptor == "fv256pca":
            payload["fv_pca"] = model_digest(_require(models, "fv_pca", descriptor))
    return config_hash(payload)


def check_models(settings, descriptor, models):
    """Verifies that every model the descriptor needs was built for the current settings."""
    if descriptor == "rl":
        return
    if descriptor == "hybrid-act":
        _require(models, "mlp", descriptor)
        meta = models.metadata["mlp"]
        base = meta.get("input_descriptor")
        if base not in MLP_INPUTS:
            raise DataError(f"MLP model '{meta['path']}' has no usable input descriptor ({base!r})")
        check_models(settings, base, models)
        if meta.get("input_hash") != descriptor_hash(settings, base, models):
            raise DataError(f"MLP model '{meta['path']}' was trained on different {base} features")
        return
    expected = local_hash(settings)
    for kind in ("pca", "gmm"):
        _require(models, kind, descriptor)
        check_config_hash(models.metadata[kind], expected, models.metadata[kind]["path"])
    if descriptor in FV_VARIANTS:
        _, n_components = FV_VARIANTS[descriptor]
        if models.gmm.n_components != n_components:
            raise DataError(f"{descriptor} needs a {n_components}-component GMM, "
                            f"'{models.metadata['gmm']['path']}' has {models.gmm.n_components}")
    if models.pca.out_dim + 3 != models.gmm.dim:
        raise DataError(f"PCA output ({models.pca.out_dim} + 3) does not match GMM dimension {models.gmm.dim}")
    if descriptor == "fv256pca":
        _require(models, "fv_pca", descriptor)
        if models.gmm.n_components != FV_VARIANTS["fv256"][1]:
            raise DataError("fv256pca needs the fv256 GMM")
        meta = models.metadata["fv_pca"]
        if meta.get("input_hash") != descriptor_hash(settings, "fv256", models):
            raise DataError(f"FV PCA model '{meta['path']}' was fit on different fv256 features")


def descriptor_dim(settings, descriptor, models):
    if descriptor == "rl":
        return rl_config(settings).dim
    if descriptor in FV_VARIANTS:
        return fv_dim(models.gmm, FV_VARIANTS[descriptor][0])
    if descriptor == "fv256pca":
        return models.fv_pca.out_dim
    return models.mlp.hidden_width


# =============================================================================
# Per-page recipes
# =============================================================================
def page_binary(gray, settings):
    """Binarize, then rescale to the pixel budget."""
    return downscale_to_max_pixels(binarize(gray, settings["binarize_threshold"]), settings["max_pixels"])


def page_sift(gray, settings):
    """Raw 128-dim descriptors and (x, y, size) geometry of the rescaled page."""
    page = downscale_to_max_pixels(gray, settings["max_pixels"])
    descriptors, geometry = extract_local_descriptors(page, patch_config(settings))
    return descriptors, geometry, page.width, page.height


def page_local_descriptors(gray, settings, pca):
    descriptors, geometry, width, height = page_sift(gray, settings)
    return project_augment_batch(descriptors, geometry, width, height, pca, settings["sift_scales"])


def encode_page(gray, descriptor, models, settings):
    """One page -> one feature vector."""
    if descriptor == "rl":
        return rl_descriptor(page_binary(gray, settings), rl_config(settings))
    if descriptor == "hybrid-act":
        base = models.metadata["mlp"]["input_descriptor"]
        return extract_activation(encode_page(gray, base, models, settings), models.mlp,
                                  settings["mlp_activation_layer"])
    local = page_local_descriptors(gray, settings, models.pca)
    if descriptor == "fv256pca":
        grid, _ = FV_VARIANTS["fv256"]
        return fv_pca_reduce(fv_encode(local, models.gmm, grid, settings["fv_renormalize_grid"]), models.fv_pca)
    grid, _ = FV_VARIANTS[descriptor]
    return fv_encode(local, models.gmm, grid, settings["fv_renormalize_grid"])


def _map_records(manifest, fn):
    """Applies fn(index, row) to every record, in parallel if configured, results in manifest order."""
    rows = list(manifest.records.itertuples(index=False))
    threads = thread_count()
    if threads > 1 and len(rows) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(len(rows)), rows))
    return [fn(i, row) for i, row in enumerate(rows)]


def _guarded(fn):
    """Wraps a per-record job so unreadable pages come back as (None, reason)."""
    def job(index, row):
        try:
            return fn(index, row), None
        except DataError as e:
            return None, str(e)
    return job


def _check_failures(skipped, total, settings, what):
    for record_id, reason in skipped:
        logger.warning("Skipped record %s: %s", record_id, reason)
    if total and len(skipped) / total > settings["max_failure_rate"]:
        raise DataError(
            f"{what}: {len(skipped)} of {total} records failed, above the "
            f"{settings['max_failure_rate']:.0%} limit"
        )


def extract(manifest, descriptor, models, settings):
    """
    Computes one descriptor for every record of a manifest.

    Unreadable images are skipped and reported; more than the configured
    failure rate aborts with DataError.

    Returns:
        tuple: (FeatureSet, list of (id, reason) for skipped records)
    """
    if descriptor not in DESCRIPTORS:
        raise InvalidInputError(f"unknown descriptor '{descriptor}'; expected one of {DESCRIPTORS}")
    check_models(settings, descriptor, models)
    dim = descriptor_dim(settings, descriptor, models)

    def work(index, row):
        return encode_page(load_record_image(row), descriptor, models, settings)

    with stage_timer(f"extract {descriptor} ({len(manifest)} pages)"):
        results = _map_records(manifest, _guarded(work))

    ids, labels, rows, skipped = [], [], [], []
    for row, (vector, reason) in zip(manifest.records.itertuples(index=False), results):
        if vector is None:
            skipped.append((row.id, reason))
            continue
        ids.append(row.id)
        labels.append(row.label)
        rows.append(vector)
    _check_failures(skipped, len(manifest), settings, "extract")
    matrix = np.vstack(rows).astype(np.float32) if rows else np.zeros((0, dim), dtype=np.float32)
    metadata = {
        "descriptor": descriptor,
        "config_hash": descriptor_hash(settings, descriptor, models),
        "skipped": [record_id for record_id, _ in skipped],
    }
    return FeatureSet(ids, matrix, labels, metadata), skipped


# =============================================================================
# Training-set sampling
# =============================================================================
def _sample_rows(matrix, per_image, seed, index):
    if matrix.shape[0] <= per_image:
        return matrix
    rng = np.random.default_rng([seed, index])
    return matrix[np.sort(rng.choice(matrix.shape[0], per_image, replace=False))]


def sample_sift(manifest, settings):
    """Up to gmm_sample_per_image raw SIFT descriptors per page, for the descriptor PCA."""
    per_image, seed = settings["gmm_sample_per_image"], settings["seed"]

    def work(index, row):
        descriptors, _, _, _ = page_sift(load_record_image(row), settings)
        return _sample_rows(descriptors, per_image, seed, index)

    return _collect_samples(manifest, work, settings, "sample SIFT")


def sample_local(manifest, settings, pca):
    """Up to gmm_sample_per_image projected 80-dim descriptors per page, for the GMM."""
    per_image, seed = settings["gmm_sample_per_image"], settings["seed"]

    def work(index, row):
        return _sample_rows(page_local_descriptors(load_record_image(row), settings, pca), per_image, seed, index)

    return _collect_samples(manifest, work, settings, "sample local descriptors")


def _collect_samples(manifest, work, settings, what):
    with stage_timer(f"{what} ({len(manifest)} pages)"):
        results = _map_records(manifest, _guarded(work))
    skipped = [(row.id, reason) for row, (_, reason) in zip(manifest.records.itertuples(index=False), results)
               if reason is not None]
    _check_failures(skipped, len(manifest), settings, what)
    parts = [part for part, _ in results if part is not None and part.shape[0]]
    if not parts:
        raise DataError(f"{what}: no descriptors could be sampled")
    return np.vstack(parts)


def train_descriptor_pca(manifest, settings):
    sample = sample_sift(manifest, settings)
    with stage_timer(f"descriptor PCA on {sample.shape[0]} samples"):
        pca = fit_descriptor_pca(sample, settings["sift_pca_dim"])
    return pca, {"config_hash": local_hash(settings), "source": "sift", "n_samples": int(sample.shape[0])}


def train_feature_pca(features, out_dim):
    """PCA over a FeatureSet (fv256 -> fv256pca)."""
    with stage_timer(f"feature PCA {features.dim} -> {out_dim}"):
        pca = fit_pca(features.matrix.astype(np.float64), out_dim)
    return pca, {
        "source": "features",
        "input_descriptor": features.descriptor,
        "input_hash": features.config_hash,
        "n_samples": features.n,
    }


def train_vocabulary(manifest, settings, pca, n_components):
    sample = sample_local(manifest, settings, pca)
    with stage_timer(f"EM with {n_components} components on {sample.shape[0]} samples"):
        gmm = fit_em(sample, n_components, em_config(settings))
    return gmm, {"config_hash": local_hash(settings), "n_samples": int(sample.shape[0])}
