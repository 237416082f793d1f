"""
Pipeline commands.

Every command reads its inputs from the configured paths or from earlier
stages under the output directory, writes its artifacts there, and records
a run-metadata JSON. Stage manifests store image paths relative to the
output directory.
"""
import json
import os
import platform
import sys
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import PIL
import scipy
import sklearn

from config import constants as C
from config.settings_manager import PipelineConfig
from Data.fixtures import make_fixture
from Data.io import (
    load_json, load_manifest, read_features_csv, read_png, resolve_image_path, save_json, save_manifest, write_png,
)
from Data.types import DatasetManifest, LabeledSample, Split, one_hot
from features.augment import (
    AugPipeline, Batch, MixEvent, augment_training_batch, balance_manifest, parse_aug_spec, replay_event,
    rotate_flip,
)
from features.dataprep import prepare_image, relabel_name, resplit_after_augment, split
from features.embed import tsne, write_tsne_csv
from features.eval_matrix import FeatureStore, run_augmentation_study, run_matrix
from features.ganloss import GanTrainingConstants, evaluate_gan_fixture
from features.metrics import write_report_csv
from features.stats import origin_counts, split_table
from services.cache import ImageCache
from utils.errors import DataError, UsageError
from utils.helpers import sha256_digest
from utils.log import get_logger
from utils.rng import stage_stream

logger = get_logger("pipeline")


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "Pillow": PIL.__version__,
        "scikit-learn": sklearn.__version__,
        "scipy": scipy.__version__,
        "leafaug": C.VERSION,
    }


def write_run_meta(out_dir: str, command: str, digest: str, seed: int, extra: Optional[Dict] = None) -> str:
    """Record what produced the artifacts of one command."""
    path = os.path.join(out_dir, C.RUN_META_DIR, f"{command}.json")
    meta = {"command": command, "config_digest": digest, "master_seed": seed, "versions": versions()}
    if extra:
        meta.update(extra)
    save_json(meta, path)
    return path


def image_loader(cfg: PipelineConfig) -> ImageCache:
    return ImageCache(cfg.paths.output_dir, size=C.IMAGE_SIZE, max_entries=256)


def load_stage(cfg: PipelineConfig, relative: str, produced_by: str) -> DatasetManifest:
    path = cfg.paths.output(relative)
    if not os.path.isfile(path):
        raise DataError(f"{path} not found; run '{produced_by}' first")
    return load_manifest(path, image_root=cfg.paths.output_dir)


def latest_manifest(cfg: PipelineConfig) -> DatasetManifest:
    """The most processed manifest available under the output directory."""
    for relative, command in ((C.RESPLIT_MANIFEST, "resplit"), (C.BALANCED_MANIFEST, "balance"),
                              (C.SPLIT_MANIFEST, "split"), (C.PREPARED_MANIFEST, "prepare")):
        if os.path.isfile(cfg.paths.output(relative)):
            return load_stage(cfg, relative, command)
    raise DataError(f"no manifest under {cfg.paths.output_dir}; run 'prepare' first")


def training_manifest(cfg: PipelineConfig) -> DatasetManifest:
    selector = cfg.train_manifest
    if selector == "auto":
        selector = "resplit" if os.path.isfile(cfg.paths.output(C.RESPLIT_MANIFEST)) else "split"
    if selector == "resplit":
        return load_stage(cfg, C.RESPLIT_MANIFEST, "resplit")
    return load_stage(cfg, C.SPLIT_MANIFEST, "split")


def load_pool(cfg: PipelineConfig) -> DatasetManifest:
    """Synthetic pool with image paths rebased onto the output directory."""
    pool = load_manifest(cfg.require_path("synthetic_pool"), image_root=cfg.paths.image_root)
    rebased = [
        replace(s, image_path=os.path.relpath(resolve_image_path(s, cfg.paths.image_root), cfg.paths.output_dir))
        for s in pool.samples
    ]
    return pool.with_samples(rebased)


def single_pipeline(cfg: PipelineConfig, command: str) -> AugPipeline:
    if len(cfg.aug_pipelines) != 1:
        raise UsageError(f"'{command}' takes exactly one augmentation, got {len(cfg.aug_pipelines)}")
    return cfg.aug_pipelines[0]


def _log_table(title: str, manifest: DatasetManifest) -> None:
    logger.info("%s: %s", title, json.dumps(split_table(manifest), sort_keys=True))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_prepare(cfg: PipelineConfig) -> None:
    """Relabel, mask at source resolution, resize and write the prepared images."""
    source = load_manifest(cfg.require_path("input_manifest"), image_root=cfg.paths.image_root,
                           label_parser=relabel_name)
    prepared: List[LabeledSample] = []
    for sample in source.samples:
        img = read_png(resolve_image_path(sample, cfg.paths.image_root), sample.id)
        relative = f"{C.PREPARED_DIR}/images/{sample.id}.png"
        write_png(cfg.paths.output(relative), prepare_image(img, sample.mask, C.IMAGE_SIZE))
        prepared.append(replace(sample, image_path=relative, split=None))
    manifest = source.with_samples(prepared)
    save_manifest(manifest, cfg.paths.output(C.PREPARED_MANIFEST))
    logger.info("Prepared %d images (%s)", len(manifest), json.dumps(origin_counts(manifest)))


def cmd_split(cfg: PipelineConfig) -> None:
    manifest = load_stage(cfg, C.PREPARED_MANIFEST, "prepare")
    result = split(manifest, cfg.split, stage_stream(cfg.master_seed, "split"))
    save_manifest(result, cfg.paths.output(C.SPLIT_MANIFEST))
    _log_table("Split", result)


def cmd_balance(cfg: PipelineConfig) -> None:
    manifest = load_stage(cfg, C.SPLIT_MANIFEST, "split")
    balanced, plan = balance_manifest(manifest, load_pool(cfg), stage_stream(cfg.master_seed, "balance"))
    save_manifest(balanced, cfg.paths.output(C.BALANCED_MANIFEST))
    save_json(plan.to_dict(), cfg.paths.output(C.BALANCE_PLAN))
    _log_table("Balanced", balanced)


def cmd_resplit(cfg: PipelineConfig) -> None:
    """Split the augmented train+dev pool back into train and dev; test stays as it is."""
    manifest = load_stage(cfg, C.BALANCED_MANIFEST, "balance")
    test = manifest.by_split(Split.TEST)
    train_dev = manifest.filter(splits=(Split.TRAIN, Split.DEV, None))
    resplit = resplit_after_augment(train_dev, stage_stream(cfg.master_seed, "resplit"), cfg.split)
    result = resplit.with_samples(list(resplit.samples) + test)
    save_manifest(result, cfg.paths.output(C.RESPLIT_MANIFEST))
    _log_table("Resplit", result)


def cmd_train(cfg: PipelineConfig) -> None:
    """Train one classifier per augmentation and write a report row for each."""
    manifest = training_manifest(cfg)
    results = run_augmentation_study(manifest, cfg.aug_pipelines, cfg.train, image_loader(cfg), cfg.augmentation)
    for pipeline, (model, _) in zip(cfg.aug_pipelines, results):
        model.save(cfg.paths.output(os.path.join(C.MODEL_DIR, f"{pipeline.name}.npz")))
    reports = [report for _, report in results]
    write_report_csv(reports, cfg.paths.output(C.TRAIN_REPORT))
    logger.info("Wrote %d report rows to %s", len(reports), cfg.paths.output(C.TRAIN_REPORT))


def cmd_eval_matrix(cfg: PipelineConfig) -> None:
    real = load_stage(cfg, C.SPLIT_MANIFEST, "split")
    pipeline = single_pipeline(cfg, "eval-matrix")
    result = run_matrix(real, load_pool(cfg), cfg.train, image_loader(cfg), cfg.split,
                        pipeline=pipeline, aug_cfg=cfg.augmentation)
    write_report_csv(result.reports, cfg.paths.output(C.MATRIX_REPORT))
    save_json(result.run_manifest(), cfg.paths.output(C.MATRIX_RUN_MANIFEST))


def cmd_tsne(cfg: PipelineConfig) -> None:
    """Embed the latest manifest, or an imported feature file keyed by the same ids."""
    manifest = latest_manifest(cfg)
    if cfg.paths.features_csv:
        ids, features = read_features_csv(cfg.require_path("features_csv"))
        by_id = {s.id: s for s in manifest.samples}
        unknown = [i for i in ids if i not in by_id]
        if unknown:
            raise DataError(f"feature file id '{unknown[0]}' is not in the manifest")
        samples = [by_id[i] for i in ids]
    else:
        samples = list(manifest.samples)
        features = FeatureStore(image_loader(cfg)).features(samples)
    result = tsne(features, cfg.tsne)
    write_tsne_csv(cfg.paths.output(C.TSNE_OUTPUT), [s.id for s in samples], result.coords,
                   [s.label.value for s in samples], [s.origin.value for s in samples])
    save_json({"kl_trace": list(result.kl_trace)}, cfg.paths.output(C.TSNE_KL_OUTPUT))


def cmd_gan_loss(cfg: PipelineConfig) -> None:
    """Evaluate the GAN objectives on a fixture and print them as JSON on stdout."""
    directory = cfg.require_path("gan_fixture")
    has_weights = os.path.isfile(os.path.join(directory, "weights.json"))
    terms = evaluate_gan_fixture(directory, None if has_weights else cfg.gan_weights)
    save_json({"terms": terms, "training_constants": GanTrainingConstants().to_dict()},
              cfg.paths.output(C.GAN_LOSS_OUTPUT))
    sys.stdout.write(json.dumps(terms, sort_keys=True) + "\n")
    sys.stdout.flush()


def _preview_batch(cfg: PipelineConfig, ids: Sequence[str], manifest: DatasetManifest) -> Batch:
    by_id = {s.id: s for s in manifest.samples}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise DataError(f"preview sample '{missing[0]}' is not in the manifest")
    loader = image_loader(cfg)
    samples = [by_id[i] for i in ids]
    return Batch.from_images([loader(s) for s in samples], [one_hot(s.label) for s in samples])


def _write_preview(directory: str, ids: Sequence[str], batch: Batch) -> None:
    for k, (sample_id, img) in enumerate(zip(ids, batch.images)):
        write_png(os.path.join(directory, f"{k:02d}_{sample_id}.png"), img)


def cmd_augment_preview(cfg: PipelineConfig, replay: Optional[str] = None) -> None:
    """
    Augment one training batch and write it as PNGs with a sidecar event.

    With replay, the sidecar's event is re-applied to the same batch and the
    result goes to the replay directory.
    """
    manifest = latest_manifest(cfg)
    if replay is None:
        pool = manifest.by_split(Split.TRAIN) or list(manifest.samples)
        ids = [s.id for s in pool[:cfg.preview_batch_size]]
        pipeline = single_pipeline(cfg, "augment-preview")
        stream = stage_stream(cfg.master_seed, "preview")
        augmented, event = augment_training_batch(_preview_batch(cfg, ids, manifest), pipeline,
                                                  cfg.augmentation, stream)
        _write_preview(cfg.paths.output(C.PREVIEW_DIR), ids, augmented)
        save_json({
            "ids": ids,
            "pipeline": pipeline.name,
            "master_seed": cfg.master_seed,
            "event": event.to_json(),
            "labels": np.round(augmented.labels, 9).tolist(),
        }, cfg.paths.output(C.PREVIEW_EVENT))
        return

    sidecar = load_json(replay)
    ids = sidecar["ids"]
    pipeline = parse_aug_spec(sidecar["pipeline"])
    batch = _preview_batch(cfg, ids, manifest)
    if pipeline.rotflip:
        # rotation and flip draws come first on the preview stream
        stream = stage_stream(int(sidecar["master_seed"]), "preview")
        batch = Batch(np.stack([rotate_flip(img, stream, cfg.augmentation) for img in batch.images]), batch.labels)
    _write_preview(cfg.paths.output(C.PREVIEW_REPLAY_DIR), ids, replay_event(batch, MixEvent.from_json(sidecar["event"])))


def cmd_make_fixture(directory: str, seed: int, artifact: bool = True) -> Dict[str, str]:
    paths = make_fixture(directory, seed=seed, artifact=artifact)
    write_run_meta(directory, "make-fixture", sha256_digest({"seed": seed, "artifact": artifact}), seed)
    return paths


COMMANDS: Dict[str, Callable[..., None]] = {
    "prepare": cmd_prepare,
    "split": cmd_split,
    "balance": cmd_balance,
    "resplit": cmd_resplit,
    "train": cmd_train,
    "eval-matrix": cmd_eval_matrix,
    "tsne": cmd_tsne,
    "gan-loss": cmd_gan_loss,
    "augment-preview": cmd_augment_preview,
}


def run_command(name: str, cfg: PipelineConfig, **kwargs) -> None:
    """Run one configured command and record its run metadata."""
    if name not in COMMANDS:
        raise UsageError(f"unknown command '{name}'")
    logger.info("Running %s (seed %d, output %s)", name, cfg.master_seed, cfg.paths.output_dir)
    COMMANDS[name](cfg, **kwargs)
    write_run_meta(cfg.paths.output_dir, name, cfg.digest, cfg.master_seed)
