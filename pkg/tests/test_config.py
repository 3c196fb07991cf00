import pytest

from config import DETERMINISTIC_ENV, SIFT_SCALES, THREADS_ENV, load_settings, thread_count
from errors import UsageError
from utils import config_hash, format_mean_std, format_score


class TestSettings:
    def test_defaults(self):
        settings = load_settings()
        assert settings["sift_scales"] == SIFT_SCALES
        assert settings["max_pixels"] == 250_000

    def test_file_values_take_the_default_types(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("# comment\nsift_scales = 16, 32\nmlp_dropout = 0.4\nfv_renormalize_grid = no\n"
                        "seed = 9  # trailing comment\n", encoding="utf-8")
        settings = load_settings(path)
        assert settings["sift_scales"] == (16, 32)
        assert settings["mlp_dropout"] == 0.4
        assert settings["fv_renormalize_grid"] is False
        assert settings["seed"] == 9

    def test_overrides_win_and_none_is_ignored(self, settings_file):
        settings = load_settings(settings_file, {"sift_stride": 4, "seed": None})
        assert settings["sift_stride"] == 4
        assert settings["max_pixels"] == 40_000
        assert settings["seed"] == load_settings()["seed"]

    @pytest.mark.parametrize("text, message", [
        ("unknown_key = 1\n", "unknown settings key"),
        ("rl_bins = eleven\n", "bad value"),
        ("rl_bins 11\n", "key = value"),
    ])
    def test_bad_lines(self, tmp_path, text, message):
        path = tmp_path / "bad.conf"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(UsageError, match=message):
            load_settings(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError):
            load_settings(tmp_path / "absent.conf")

    def test_unknown_override(self):
        with pytest.raises(UsageError):
            load_settings(None, {"colour": "red"})


class TestThreads:
    def test_deterministic_mode_pins_one_thread(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "8")
        assert thread_count() == 1

    def test_thread_variable(self, monkeypatch):
        monkeypatch.delenv(DETERMINISTIC_ENV)
        monkeypatch.setenv(THREADS_ENV, "8")
        assert thread_count() == 8

    def test_garbage_falls_back_to_one(self, monkeypatch):
        monkeypatch.delenv(DETERMINISTIC_ENV)
        monkeypatch.setenv(THREADS_ENV, "many")
        assert thread_count() == 1


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": (2, 3)}) == config_hash({"b": [2, 3], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 16


def test_score_formatting():
    assert format_score(0.9567) == "95.7"
    assert format_score(None) == "N/A"
    assert format_mean_std(0.5, None) == "50.0"
    assert format_mean_std(0.5, 0.012) == "50.0 ± 1.2"
