"""
Domain types shared by every pipeline stage.

Images are numpy arrays of shape (H, W, C) with float values in [0, 1];
binary masks are (H, W) uint8 arrays of 0/1. Sample and manifest records are
frozen dataclasses.
"""
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config.constants import MANIFEST_SCHEMA_VERSION
from utils.errors import DegeneratePolygonError, DuplicateIdError, InvariantError, ShapeMismatchError

NUM_CLASSES = 5
SOFT_LABEL_TOL = 1e-6


class ClassLabel(Enum):
    """The five relabeled classes, in their fixed ordinal order."""

    HEALTHY = "healthy"
    RED_SPIDER_MITE = "red_spider_mite"
    RUST_LEVEL_LOW = "rust_level_low"
    RUST_LEVEL_MEDIUM = "rust_level_medium"
    RUST_LEVEL_HIGH = "rust_level_high"

    @property
    def index(self) -> int:
        return _CLASS_ORDER.index(self)

    @classmethod
    def from_index(cls, index: int) -> "ClassLabel":
        if not 0 <= index < NUM_CLASSES:
            raise ValueError(f"class index out of range: {index}")
        return _CLASS_ORDER[index]

    @classmethod
    def diseased(cls) -> List["ClassLabel"]:
        return [c for c in _CLASS_ORDER if c is not cls.HEALTHY]


_CLASS_ORDER: Tuple[ClassLabel, ...] = tuple(ClassLabel)


class Origin(Enum):
    REAL = "real"
    SYNTHETIC = "synthetic"


class Split(Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True)
class PolygonMask:
    """Polygon outline in source-image pixel coordinates, as (x, y) pairs."""

    points: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in self.points))

    def validate(self) -> None:
        if len(self.points) < 3:
            raise DegeneratePolygonError(f"polygon needs at least 3 points, got {len(self.points)}")

    def to_list(self) -> List[List[float]]:
        return [[x, y] for x, y in self.points]


@dataclass(frozen=True)
class LabeledSample:
    id: str
    image_path: str
    label: ClassLabel
    mask: Optional[PolygonMask] = None
    origin: Origin = Origin.REAL
    split: Optional[Split] = None

    def with_split(self, split: Optional[Split]) -> "LabeledSample":
        return replace(self, split=split)


@dataclass(frozen=True)
class DatasetManifest:
    """Validated, id-ordered collection of samples."""

    samples: Tuple[LabeledSample, ...] = field(default_factory=tuple)
    schema_version: int = MANIFEST_SCHEMA_VERSION

    def __post_init__(self):
        ordered = tuple(sorted(self.samples, key=lambda s: s.id))
        object.__setattr__(self, "samples", ordered)
        seen = set()
        for sample in ordered:
            if sample.id in seen:
                raise DuplicateIdError(sample.id)
            seen.add(sample.id)
            if sample.origin is Origin.SYNTHETIC and sample.split is Split.TEST:
                raise InvariantError(f"synthetic sample '{sample.id}' cannot be in the test split")

    def __len__(self) -> int:
        return len(self.samples)

    def ids(self) -> List[str]:
        return [s.id for s in self.samples]

    def by_split(self, split: Optional[Split]) -> List[LabeledSample]:
        return [s for s in self.samples if s.split is split]

    def filter(self, origin: Optional[Origin] = None,
               splits: Optional[Iterable[Optional[Split]]] = None) -> "DatasetManifest":
        """Sub-manifest restricted to an origin and/or a set of splits."""
        wanted = None if splits is None else set(splits)
        kept = [
            s for s in self.samples
            if (origin is None or s.origin is origin) and (wanted is None or s.split in wanted)
        ]
        return DatasetManifest(tuple(kept), self.schema_version)

    def with_samples(self, samples: Iterable[LabeledSample]) -> "DatasetManifest":
        return DatasetManifest(tuple(samples), self.schema_version)

    def class_counts(self) -> Dict[ClassLabel, int]:
        counts = Counter(s.label for s in self.samples)
        return {c: counts.get(c, 0) for c in ClassLabel}


def as_image(data: np.ndarray) -> np.ndarray:
    """
    Validate and normalise an image array.

    Args:
        data: Array of shape (H, W) or (H, W, C) with C in {1, 3}, values in [0, 1]

    Returns:
        float64 array of shape (H, W, C)
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3) or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatchError(f"image must be HxWx1 or HxWx3, got shape {arr.shape}")
    if arr.size and (np.nanmin(arr) < 0.0 or np.nanmax(arr) > 1.0 or np.isnan(arr).any()):
        raise ValueError("image values must lie in [0, 1]")
    return arr


def as_mask(data: np.ndarray) -> np.ndarray:
    """Validate a binary mask and return it as a (H, W) uint8 array."""
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"mask must be 2-D, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    return arr.astype(np.uint8)


def soft_label(probs: Sequence[float]) -> np.ndarray:
    """Validate a 5-way probability vector."""
    arr = np.asarray(probs, dtype=np.float64)
    if arr.shape != (NUM_CLASSES,):
        raise ShapeMismatchError(f"soft label must have {NUM_CLASSES} entries, got shape {arr.shape}")
    if (arr < -SOFT_LABEL_TOL).any() or (arr > 1 + SOFT_LABEL_TOL).any():
        raise ValueError("soft label entries must lie in [0, 1]")
    if abs(arr.sum() - 1.0) > SOFT_LABEL_TOL:
        raise ValueError(f"soft label must sum to 1, got {arr.sum():.9f}")
    return arr


def one_hot(label: ClassLabel) -> np.ndarray:
    vec = np.zeros(NUM_CLASSES, dtype=np.float64)
    vec[label.index] = 1.0
    return vec


def check_soft_labels(labels: np.ndarray) -> None:
    """Raise if any row of an (N, 5) label matrix is not a distribution."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim != 2 or labels.shape[1] != NUM_CLASSES:
        raise ShapeMismatchError(f"labels must be (N, {NUM_CLASSES}), got {labels.shape}")
    if (labels < -SOFT_LABEL_TOL).any() or (labels > 1 + SOFT_LABEL_TOL).any():
        raise ValueError("soft label entries must lie in [0, 1]")
    sums = labels.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > SOFT_LABEL_TOL)
    if bad.size:
        raise ValueError(f"soft label row {int(bad[0])} sums to {sums[bad[0]]:.9f}, expected 1")
