"""
Tests for the settings manager, the log level loader and the image cache.
"""
import os

import numpy as np
import pytest

from config.env_loader import load_log_level
from config.settings_manager import DEFAULT_SETTINGS, SettingsManager, load_pipeline_config
from Data.io import save_json, write_png
from Data.types import ClassLabel, LabeledSample
from features.augment import MixMethod
from services.cache import ImageCache
from utils.errors import ConfigError, MissingImageError, UsageError


def _config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    save_json(data, str(path))
    return str(path)


class TestSettingsManager:
    def test_defaults(self):
        cfg = SettingsManager().pipeline_config()
        assert cfg.master_seed == 0
        assert cfg.train.epochs == DEFAULT_SETTINGS["train"]["epochs"]
        assert [p.name for p in cfg.aug_pipelines] == ["none"]
        assert cfg.train_manifest == "auto"

    def test_paths_resolve_against_config_directory(self, tmp_path):
        path = _config(tmp_path, {"paths": {"input_manifest": "data/a.json", "output_dir": "runs/1"}})
        cfg = SettingsManager(path).pipeline_config()
        assert cfg.paths.input_manifest == os.path.join(str(tmp_path), "data", "a.json")
        assert cfg.paths.output("reports/x.csv") == os.path.join(str(tmp_path), "runs", "1", "reports/x.csv")

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match="train.epoch"):
            SettingsManager(_config(tmp_path, {"train": {"epoch": 3}}))

    @pytest.mark.parametrize("data", [
        {"train": {"epochs": 2.5}},
        {"train": {"manifest": "latest"}},
        {"augmentation": {"apply_prob": "half"}},
        {"augmentation": {"rotation_range": [0]}},
        {"split": {"train_frac": 0.5}},
        {"master_seed": -1},
    ])
    def test_invalid_values(self, tmp_path, data):
        with pytest.raises(ConfigError):
            SettingsManager(_config(tmp_path, data)).pipeline_config()

    def test_not_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            SettingsManager(str(path))

    def test_overrides(self, tmp_path):
        path = _config(tmp_path, {"master_seed": 3})
        _, cfg = load_pipeline_config(path, seed=11, out=str(tmp_path / "o"), aug="mixup,rotflip+fmix")
        assert cfg.master_seed == 11
        assert cfg.train.seed == 11 and cfg.tsne.seed == 11
        assert cfg.paths.output_dir == str(tmp_path / "o")
        assert [p.method for p in cfg.aug_pipelines] == [MixMethod.MIXUP, MixMethod.FMIX]

    def test_bad_augmentation_is_usage_error(self):
        manager = SettingsManager()
        manager.apply_overrides(aug="mixup+fmix")
        with pytest.raises(UsageError):
            manager.pipeline_config()

    def test_digest_tracks_settings(self, tmp_path):
        path = _config(tmp_path, {"master_seed": 1})
        first = load_pipeline_config(path)[1].digest
        assert load_pipeline_config(path)[1].digest == first
        assert load_pipeline_config(path, seed=2)[1].digest != first

    def test_require_path(self, tmp_path):
        cfg = SettingsManager(_config(tmp_path, {})).pipeline_config()
        with pytest.raises(ConfigError, match="synthetic_pool"):
            cfg.require_path("synthetic_pool")
        with pytest.raises(ConfigError, match="does not exist"):
            cfg.require_path("input_manifest")

    def test_save_round_trip(self, tmp_path):
        manager = SettingsManager(_config(tmp_path, {"tsne": {"iterations": 50}}))
        saved = str(tmp_path / "saved" / "settings.json")
        manager.save(saved)
        assert SettingsManager(saved).get_all_settings() == manager.get_all_settings()


class TestLogLevel:
    def test_environment_overrides_default(self, monkeypatch):
        monkeypatch.setenv("LEAFAUG_LOG_LEVEL", "debug")
        assert load_log_level() == "DEBUG"


class TestImageCache:
    def _sample(self, tmp_path, name, value=0.5, size=4):
        write_png(str(tmp_path / f"{name}.png"), np.full((size, size, 3), value))
        return LabeledSample(id=name, image_path=f"{name}.png", label=ClassLabel.HEALTHY)

    def test_hits_and_misses(self, tmp_path):
        sample = self._sample(tmp_path, "a")
        cache = ImageCache(str(tmp_path))
        first = cache(sample)
        assert cache(sample) is first
        assert (cache.hits, cache.misses) == (1, 1)
        assert not first.flags.writeable

    def test_least_recently_used_is_evicted(self, tmp_path):
        a, b, c = (self._sample(tmp_path, n) for n in "abc")
        cache = ImageCache(str(tmp_path), max_entries=2)
        cache(a)
        cache(b)
        cache(a)
        cache(c)
        assert len(cache) == 2
        assert cache.get(os.path.join(str(tmp_path), "b.png")) is None
        assert cache.get(os.path.join(str(tmp_path), "a.png")) is not None

    def test_resizes_on_load(self, tmp_path):
        cache = ImageCache(str(tmp_path), size=8)
        img = cache(self._sample(tmp_path, "a", value=0.2))
        assert img.shape == (8, 8, 3)
        assert np.allclose(img, 51 / 255)

    def test_missing_image(self, tmp_path):
        sample = LabeledSample(id="gone", image_path="gone.png", label=ClassLabel.HEALTHY)
        with pytest.raises(MissingImageError):
            ImageCache(str(tmp_path))(sample)
