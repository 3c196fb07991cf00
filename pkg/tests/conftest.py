import numpy as np
import pytest

from config import DETERMINISTIC_ENV, load_settings
from synth_docs import NoiseConfig, synth_docs

SMALL_OVERRIDES = {
    "max_pixels": 40_000,
    "sift_scales": (16, 32),
    "sift_stride": 12,
    "sift_pca_dim": 8,
    "gmm_sample_per_image": 300,
    "gmm_max_iters": 20,
    "mlp_hidden_width": 32,
    "mlp_epochs": 40,
    "mlp_dropout": 0.0,
    "eval_repeats": 3,
}


@pytest.fixture(autouse=True)
def deterministic(monkeypatch):
    monkeypatch.setenv(DETERMINISTIC_ENV, "1")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_settings():
    """Settings scaled down so the full pipeline runs on tiny pages."""
    return load_settings(None, SMALL_OVERRIDES)


@pytest.fixture
def settings_file(tmp_path):
    """The same scaled-down settings as a key-value file for the CLI."""
    lines = []
    for key, value in SMALL_OVERRIDES.items():
        text = ", ".join(str(v) for v in value) if isinstance(value, tuple) else str(value)
        lines.append(f"{key} = {text}")
    path = tmp_path / "small.conf"
    path.write_text("# scaled-down pipeline\n" + "\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """3 classes x 4 pages of 200 x 260 pixels."""
    out_dir = tmp_path_factory.mktemp("corpus")
    return synth_docs(out_dir, 3, 4, NoiseConfig(), seed=7, width=200, height=260)
