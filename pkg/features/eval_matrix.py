"""
Real vs synthetic evaluation matrix (TRTR, TRTS, TSTR, TSTS) and the
online-augmentation study.

The synthetic counterpart keeps the real healthy samples with their real
split and replaces every diseased class by synthetic samples drawn from the
pool, split with the same fractions. It only lives in memory: a synthetic
sample may be a test sample here, which a stored manifest never allows.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from Data.types import ClassLabel, DatasetManifest, LabeledSample, Origin, Split, one_hot
from features.augment import (
    AugmentationConfig, AugPipeline, Batch, augment_training_batch, select_synthetic,
)
from features.classifier import BatchHook, RefClassifier, TrainConfig, extract_features, predict_scores, train_ref
from features.dataprep import SplitSpec, partition_indices
from features.metrics import EvalReport, build_report
from utils.errors import DataError, SplitError
from utils.log import get_logger
from utils.rng import stage_stream

logger = get_logger("eval_matrix")

ImageLoader = Callable[[LabeledSample], np.ndarray]
Featurizer = Callable[[np.ndarray], np.ndarray]

MATRIX_CELLS: Tuple[str, ...] = ("TRTR", "TRTS", "TSTR", "TSTS")


@dataclass(frozen=True)
class CellData:
    train: Tuple[LabeledSample, ...]
    test: Tuple[LabeledSample, ...]

    def to_dict(self) -> Dict[str, List[Dict[str, str]]]:
        def rows(samples):
            return [{"id": s.id, "label": s.label.value, "origin": s.origin.value} for s in samples]
        return {"train": rows(self.train), "test": rows(self.test)}


@dataclass(frozen=True)
class MatrixResult:
    reports: Tuple[EvalReport, ...]
    cells: Dict[str, CellData]

    def run_manifest(self) -> Dict[str, Dict]:
        return {name: self.cells[name].to_dict() for name in MATRIX_CELLS}


class FeatureStore:
    """Loads images through a loader and caches their feature vectors by sample id."""

    def __init__(self, loader: ImageLoader, featurizer: Featurizer = extract_features):
        self.loader = loader
        self.featurizer = featurizer
        self._features: Dict[str, np.ndarray] = {}

    def features(self, samples: Sequence[LabeledSample]) -> np.ndarray:
        rows = []
        for sample in samples:
            if sample.id not in self._features:
                self._features[sample.id] = np.asarray(self.featurizer(self.loader(sample)), dtype=np.float64)
            rows.append(self._features[sample.id])
        return np.stack(rows)


def labels_of(samples: Sequence[LabeledSample]) -> np.ndarray:
    return np.stack([one_hot(s.label) for s in samples])


def augment_hook(samples: Sequence[LabeledSample], store: FeatureStore, pipeline: AugPipeline,
                 aug_cfg: AugmentationConfig, seed: int, stage: str) -> BatchHook:
    """
    Batch hook that augments each training mini-batch at image level.

    Evaluation data never passes through here.
    """
    labels = labels_of(samples)

    def hook(idx: np.ndarray, epoch: int, batch_no: int) -> Tuple[np.ndarray, np.ndarray]:
        batch = Batch.from_images([store.loader(samples[int(i)]) for i in idx], [labels[int(i)] for i in idx])
        stream = stage_stream(seed, f"{stage}/augment", epoch, batch_no)
        augmented, _ = augment_training_batch(batch, pipeline, aug_cfg, stream)
        feats = np.stack([store.featurizer(img) for img in augmented.images])
        return feats, np.asarray(augmented.labels)

    return hook


def fit(samples: Sequence[LabeledSample], store: FeatureStore, cfg: TrainConfig, stage: str,
        pipeline: Optional[AugPipeline] = None, aug_cfg: AugmentationConfig = AugmentationConfig(),
        dev: Sequence[LabeledSample] = ()) -> RefClassifier:
    """Train on a list of samples, optionally augmenting each mini-batch."""
    if not samples:
        raise SplitError(f"no training samples for '{stage}'")
    hook = None
    if pipeline is not None and pipeline.name != "none":
        hook = augment_hook(samples, store, pipeline, aug_cfg, cfg.seed, stage)
    dev_data = (store.features(dev), labels_of(dev)) if dev else None
    return train_ref(store.features(samples), labels_of(samples), cfg, batch_hook=hook, stage=stage, dev=dev_data)


def evaluate(model: RefClassifier, samples: Sequence[LabeledSample], store: FeatureStore,
             method: str) -> EvalReport:
    if not samples:
        raise SplitError(f"no test samples for '{method}'")
    report = build_report(method, predict_scores(model, store.features(samples)), [s.label for s in samples])
    if report.zero_division_classes:
        logger.warning("%s: classes with undefined precision or recall counted as 0: %s", method,
                       ", ".join(c.value for c in report.zero_division_classes))
    return report


def synthetic_counterpart(real: DatasetManifest, pool: DatasetManifest, spec: SplitSpec,
                          seed: int) -> Dict[Split, List[LabeledSample]]:
    """
    Healthy real samples with their split, plus synthetic diseased samples per split.

    Each diseased class draws min(pool size, healthy count) synthetic samples
    and splits them with the configured fractions.
    """
    healthy = [s for s in real.samples if s.label is ClassLabel.HEALTHY]
    parts: Dict[Split, List[LabeledSample]] = {split: [s for s in healthy if s.split is split] for split in Split}
    for label in ClassLabel.diseased():
        available = [s for s in pool.samples if s.origin is Origin.SYNTHETIC and s.label is label]
        if not available:
            raise DataError(f"synthetic pool has no '{label.value}' samples")
        count = min(len(available), len(healthy))
        picked = select_synthetic(pool, label, count, stage_stream(seed, "matrix/select", label.index))
        train, dev, test = partition_indices(len(picked), spec, stage_stream(seed, "matrix/split", label.index))
        for indices, split in ((train, Split.TRAIN), (dev, Split.DEV), (test, Split.TEST)):
            parts[split].extend(picked[int(i)].with_split(split) for i in indices)
    for split in Split:
        parts[split].sort(key=lambda s: s.id)
    return parts


def run_matrix(real: DatasetManifest, synthetic_pool: DatasetManifest, cfg: TrainConfig,
               image_loader: ImageLoader, spec: SplitSpec = SplitSpec(),
               pipeline: Optional[AugPipeline] = None,
               aug_cfg: AugmentationConfig = AugmentationConfig(),
               featurizer: Featurizer = extract_features) -> MatrixResult:
    """
    Train on real or synthetic data and test on real or synthetic data.

    Args:
        real: Manifest with train/dev/test splits; only its real samples are used
        synthetic_pool: Generated diseased samples covering every diseased class
        cfg: Classifier training configuration, including the seed
        image_loader: Returns the image of a sample
        spec: Split fractions for the synthetic counterpart
        pipeline: Optional online augmentation for the training batches

    Returns:
        MatrixResult with reports ordered TRTR, TRTS, TSTR, TSTS
    """
    real = real.filter(origin=Origin.REAL)
    real_parts = {split: real.by_split(split) for split in Split}
    missing = [split.value for split in (Split.TRAIN, Split.TEST) if not real_parts[split]]
    if missing:
        raise SplitError(f"real manifest has no samples in split(s): {', '.join(missing)}")
    synth_parts = synthetic_counterpart(real, synthetic_pool, spec, cfg.seed)

    store = FeatureStore(image_loader, featurizer)
    models = {
        "TR": fit(real_parts[Split.TRAIN], store, cfg, "matrix/TR", pipeline, aug_cfg, real_parts[Split.DEV]),
        "TS": fit(synth_parts[Split.TRAIN], store, cfg, "matrix/TS", pipeline, aug_cfg, synth_parts[Split.DEV]),
    }
    train_sets = {"TR": real_parts[Split.TRAIN], "TS": synth_parts[Split.TRAIN]}
    test_sets = {"TR": real_parts[Split.TEST], "TS": synth_parts[Split.TEST]}

    reports, cells = [], {}
    for name in MATRIX_CELLS:
        train_key, test_key = name[:2], name[2:]
        reports.append(evaluate(models[train_key], test_sets[test_key], store, name))
        cells[name] = CellData(tuple(train_sets[train_key]), tuple(test_sets[test_key]))
    logger.info("Evaluation matrix: %s", ", ".join(f"{r.method} acc={r.accuracy:.1f}" for r in reports))
    return MatrixResult(tuple(reports), cells)


def run_augmentation_study(manifest: DatasetManifest, pipelines: Sequence[AugPipeline], cfg: TrainConfig,
                           image_loader: ImageLoader,
                           aug_cfg: AugmentationConfig = AugmentationConfig(),
                           featurizer: Featurizer = extract_features) -> List[Tuple[RefClassifier, EvalReport]]:
    """
    Train one classifier per augmentation pipeline on the train split and test it.

    Returns:
        (model, report) pairs in pipeline order, report.method = pipeline name
    """
    train = manifest.by_split(Split.TRAIN)
    dev = manifest.by_split(Split.DEV)
    test = manifest.by_split(Split.TEST)
    if not train or not test:
        raise SplitError("manifest needs train and test samples; run split first")
    store = FeatureStore(image_loader, featurizer)
    results = []
    for pipeline in pipelines:
        model = fit(train, store, cfg, f"study/{pipeline.name}", pipeline, aug_cfg, dev)
        results.append((model, evaluate(model, test, store, pipeline.name)))
    return results
