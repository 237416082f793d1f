"""
Settings Manager

Loads one JSON run configuration, merges it over the defaults, validates it
and turns it into a frozen PipelineConfig. Command-line flags override
individual scalars on top of the file.
"""
import copy
import json
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from config import constants as C
from features.augment import AugmentationConfig, AugPipeline, BetaParams, parse_aug_list
from features.classifier import TrainConfig
from features.dataprep import SplitSpec
from features.embed import TsneConfig
from features.ganloss import GanLossWeights
from utils.errors import ConfigError
from utils.helpers import sha256_digest
from utils.log import get_logger

logger = get_logger("settings")

MANIFEST_SELECTORS = ("auto", "split", "resplit")
PATH_KEYS = ("input_manifest", "image_root", "output_dir", "synthetic_pool", "features_csv", "gan_fixture")

DEFAULT_SETTINGS: Dict[str, Any] = {
    "master_seed": 0,
    "paths": {
        "input_manifest": "annotations.json",
        "image_root": ".",
        "output_dir": "out",
        "synthetic_pool": None,
        "features_csv": None,
        "gan_fixture": None,
    },
    "split": {
        "train_frac": C.TRAIN_FRAC,
        "dev_frac": C.DEV_FRAC,
        "test_frac": C.TEST_FRAC,
        "resplit_ratio": list(C.RESPLIT_RATIO),
    },
    "augmentation": {
        "methods": "none",
        "apply_prob": C.APPLY_PROB,
        "flip_prob": C.FLIP_PROB,
        "rotation_range": list(C.ROTATION_RANGE),
        "beta_mix": list(C.BETA_MIX),
        "beta_fmix": list(C.BETA_FMIX),
        "fmix_decay": C.FMIX_DECAY,
        "center_margin_frac": C.CENTER_MARGIN_FRAC,
        "preview_batch_size": C.AUG_BATCH_SIZE,
    },
    "train": {
        "batch_size": C.TRAIN_BATCH_SIZE,
        "epochs": C.TRAIN_EPOCHS,
        "initial_lr": C.TRAIN_INITIAL_LR,
        "lr_decay": C.TRAIN_LR_DECAY,
        "lr_decay_every": C.TRAIN_LR_DECAY_EVERY,
        "manifest": "auto",
    },
    "tsne": {
        "perplexity": C.TSNE_PERPLEXITY,
        "iterations": C.TSNE_ITERATIONS,
        "learning_rate": C.TSNE_LEARNING_RATE,
        "momentum_early": C.TSNE_MOMENTUM_EARLY,
        "momentum_late": C.TSNE_MOMENTUM_LATE,
        "momentum_switch": C.TSNE_EXAGGERATION_ITERS,
        "early_exaggeration": C.TSNE_EXAGGERATION,
        "exaggeration_iters": C.TSNE_EXAGGERATION_ITERS,
    },
    "gan_weights": {
        "pix2pix_l1": C.PIX2PIX_L1_WEIGHT,
        "cycle": C.CYCLE_WEIGHT,
        "identity": C.IDENTITY_WEIGHT,
    },
}

INT_KEYS = {
    "master_seed", "batch_size", "epochs", "lr_decay_every", "iterations", "momentum_switch",
    "exaggeration_iters", "preview_batch_size",
}


@dataclass(frozen=True)
class PathsConfig:
    input_manifest: str
    image_root: str
    output_dir: str
    synthetic_pool: Optional[str] = None
    features_csv: Optional[str] = None
    gan_fixture: Optional[str] = None

    def output(self, relative: str) -> str:
        return os.path.join(self.output_dir, relative)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one run depends on, resolved from a single file."""

    master_seed: int
    paths: PathsConfig
    split: SplitSpec
    augmentation: AugmentationConfig
    aug_pipelines: Tuple[AugPipeline, ...]
    preview_batch_size: int
    train: TrainConfig
    train_manifest: str
    tsne: TsneConfig
    gan_weights: GanLossWeights
    settings: Dict[str, Any]

    @property
    def digest(self) -> str:
        return sha256_digest(self.settings)

    def require_path(self, key: str) -> str:
        """Return a configured path that must exist."""
        value = getattr(self.paths, key)
        if not value:
            raise ConfigError(f"paths.{key} is not set in the configuration")
        if not os.path.exists(value):
            raise ConfigError(f"paths.{key} does not exist: {value}")
        return value


def _merge(defaults: Dict[str, Any], overrides: Dict[str, Any], where: str = "") -> Dict[str, Any]:
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        name = f"{where}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown configuration key '{name}'")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"configuration key '{name}' must be an object")
            merged[key] = _merge(defaults[key], value, f"{name}.")
        else:
            merged[key] = value
    return merged


def _number(section: Dict[str, Any], key: str, where: str) -> float:
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{where}.{key}' must be a number, got {value!r}")
    if key in INT_KEYS:
        if int(value) != value:
            raise ConfigError(f"'{where}.{key}' must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _pair(section: Dict[str, Any], key: str, where: str) -> Tuple[float, float]:
    value = section[key]
    if not isinstance(value, (list, tuple)) or len(value) != 2 or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
        raise ConfigError(f"'{where}.{key}' must be a pair of numbers, got {value!r}")
    return float(value[0]), float(value[1])


class SettingsManager:
    """Manages the run configuration with JSON file persistence."""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the settings manager and load the configuration.

        Args:
            config_path: JSON file; relative paths inside it resolve against its directory.
                None uses the defaults relative to the working directory.
        """
        self._config_path = config_path
        self._base_dir = os.path.dirname(os.path.abspath(config_path)) if config_path else os.getcwd()
        self._config: Dict[str, Any] = {}
        self._load_config()

    def _load_config(self) -> None:
        """Load configuration from the JSON file, merged over the defaults."""
        raw: Dict[str, Any] = {}
        if self._config_path:
            try:
                with open(self._config_path, "r", encoding="utf-8") as f:
                    raw = json.load(f)
            except FileNotFoundError:
                raise ConfigError(f"configuration file not found: {self._config_path}") from None
            except (json.JSONDecodeError, UnicodeDecodeError) as e:
                raise ConfigError(f"{self._config_path}: not valid JSON ({e})") from None
            if not isinstance(raw, dict):
                raise ConfigError(f"{self._config_path}: top level must be an object")
        self._config = _merge(DEFAULT_SETTINGS, raw)
        logger.debug("Loaded configuration from %s", self._config_path or "defaults")

    def apply_overrides(self, seed: Optional[int] = None, out: Optional[str] = None,
                        aug: Optional[str] = None) -> None:
        """Apply command-line overrides; --out resolves against the working directory."""
        if seed is not None:
            self._config["master_seed"] = seed
        if out is not None:
            self._config["paths"]["output_dir"] = os.path.abspath(out)
        if aug is not None:
            self._config["augmentation"]["methods"] = aug

    def _resolve(self, value: Optional[str]) -> Optional[str]:
        if value is None:
            return None
        if not isinstance(value, str) or not value:
            raise ConfigError(f"paths must be non-empty strings, got {value!r}")
        return os.path.normpath(os.path.join(self._base_dir, value))

    def get_all_settings(self) -> Dict[str, Any]:
        """Return the settings with every path resolved."""
        resolved = copy.deepcopy(self._config)
        resolved["paths"] = {k: self._resolve(v) for k, v in self._config["paths"].items()}
        return resolved

    def pipeline_config(self) -> PipelineConfig:
        """Validate the settings and build a PipelineConfig."""
        settings = self.get_all_settings()
        seed = _number(settings, "master_seed", "config")
        if not 0 <= seed < 2 ** 64:
            raise ConfigError(f"master_seed must be an unsigned 64-bit integer, got {seed}")

        split = settings["split"]
        aug = settings["augmentation"]
        train = settings["train"]
        tsne = settings["tsne"]
        weights = settings["gan_weights"]

        if train["manifest"] not in MANIFEST_SELECTORS:
            raise ConfigError(f"train.manifest must be one of {', '.join(MANIFEST_SELECTORS)}, got {train['manifest']!r}")
        if not isinstance(aug["methods"], str):
            raise ConfigError(f"augmentation.methods must be a string, got {aug['methods']!r}")
        preview_batch = _number(aug, "preview_batch_size", "augmentation")
        if preview_batch < 1:
            raise ConfigError(f"augmentation.preview_batch_size must be positive, got {preview_batch}")
        ratio = _pair(split, "resplit_ratio", "split")
        if any(int(r) != r for r in ratio):
            raise ConfigError(f"split.resplit_ratio must hold integers, got {split['resplit_ratio']!r}")

        return PipelineConfig(
            master_seed=seed,
            paths=PathsConfig(**settings["paths"]),
            split=SplitSpec(
                _number(split, "train_frac", "split"), _number(split, "dev_frac", "split"),
                _number(split, "test_frac", "split"), (int(ratio[0]), int(ratio[1])),
            ),
            augmentation=AugmentationConfig(
                apply_prob=_number(aug, "apply_prob", "augmentation"),
                flip_prob=_number(aug, "flip_prob", "augmentation"),
                rotation_range=_pair(aug, "rotation_range", "augmentation"),
                beta_mix=BetaParams(*_pair(aug, "beta_mix", "augmentation")),
                beta_fmix=BetaParams(*_pair(aug, "beta_fmix", "augmentation")),
                fmix_decay=_number(aug, "fmix_decay", "augmentation"),
                center_margin_frac=_number(aug, "center_margin_frac", "augmentation"),
            ),
            aug_pipelines=tuple(parse_aug_list(aug["methods"])),
            preview_batch_size=preview_batch,
            train=TrainConfig(
                batch_size=_number(train, "batch_size", "train"),
                epochs=_number(train, "epochs", "train"),
                initial_lr=_number(train, "initial_lr", "train"),
                lr_decay=_number(train, "lr_decay", "train"),
                lr_decay_every=_number(train, "lr_decay_every", "train"),
                seed=seed,
            ),
            train_manifest=train["manifest"],
            tsne=TsneConfig(seed=seed, **{k: _number(tsne, k, "tsne") for k in tsne}),
            gan_weights=GanLossWeights(**{k: _number(weights, k, "gan_weights") for k in weights}),
            settings=settings,
        )

    def save(self, path: str) -> None:
        """Write the resolved settings as JSON."""
        try:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(self.get_all_settings(), f, indent=2, sort_keys=True, ensure_ascii=False)
                f.write("\n")
        except OSError as e:
            raise ConfigError(f"cannot write settings to {path}: {e}") from None


def load_pipeline_config(config_path: Optional[str], seed: Optional[int] = None, out: Optional[str] = None,
                         aug: Optional[str] = None) -> Tuple[SettingsManager, PipelineConfig]:
    """Load a configuration file, apply flag overrides and validate."""
    manager = SettingsManager(config_path)
    manager.apply_overrides(seed=seed, out=out, aug=aug)
    return manager, manager.pipeline_config()
