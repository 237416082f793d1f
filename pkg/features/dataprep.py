"""
Dataset preparation: relabeling, polygon masks, resizing and splitting.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.constants import DEV_FRAC, RESPLIT_RATIO, TEST_FRAC, TRAIN_FRAC
from Data.types import (
    ClassLabel, DatasetManifest, LabeledSample, Origin, PolygonMask, Split, as_image, as_mask,
)
from features.stats import classes_missing_per_split
from utils.errors import ConfigError, ShapeMismatchError, SplitError
from utils.log import get_logger
from utils.rng import RngStream

logger = get_logger("dataprep")


class OriginalLabel(Enum):
    """Labels as they come with the source dataset."""

    HEALTHY = "healthy"
    RED_SPIDER_MITE = "red_spider_mite"
    RUST_LEVEL_1 = "rust_level_1"
    RUST_LEVEL_2 = "rust_level_2"
    RUST_LEVEL_3 = "rust_level_3"
    RUST_LEVEL_4 = "rust_level_4"


RELABEL_MAP: Dict[OriginalLabel, ClassLabel] = {
    OriginalLabel.HEALTHY: ClassLabel.HEALTHY,
    OriginalLabel.RED_SPIDER_MITE: ClassLabel.RED_SPIDER_MITE,
    OriginalLabel.RUST_LEVEL_1: ClassLabel.RUST_LEVEL_LOW,
    OriginalLabel.RUST_LEVEL_2: ClassLabel.RUST_LEVEL_MEDIUM,
    OriginalLabel.RUST_LEVEL_3: ClassLabel.RUST_LEVEL_HIGH,
    OriginalLabel.RUST_LEVEL_4: ClassLabel.RUST_LEVEL_HIGH,
}


def relabel(label: OriginalLabel) -> ClassLabel:
    """Collapse the six source labels onto the five training classes."""
    return RELABEL_MAP[label]


def relabel_name(name: str) -> ClassLabel:
    """Relabel from the source label string; raises ValueError for unknown names."""
    return relabel(OriginalLabel(name))


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = TRAIN_FRAC
    dev_frac: float = DEV_FRAC
    test_frac: float = TEST_FRAC
    resplit_ratio: Tuple[int, int] = RESPLIT_RATIO

    def __post_init__(self):
        fracs = (self.train_frac, self.dev_frac, self.test_frac)
        if any(f < 0 or f > 1 for f in fracs):
            raise ConfigError(f"split fractions must lie in [0, 1], got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fracs)}")
        train_parts, dev_parts = self.resplit_ratio
        if train_parts < 1 or dev_parts < 0:
            raise ConfigError(f"invalid resplit ratio {self.resplit_ratio}")
        object.__setattr__(self, "resplit_ratio", (int(train_parts), int(dev_parts)))


# ---------------------------------------------------------------------------
# Masks and resampling
# ---------------------------------------------------------------------------

def rasterize_polygon(poly: PolygonMask, width: int, height: int) -> np.ndarray:
    """
    Rasterize a polygon with the even-odd rule, sampling pixel centers.

    A pixel (i, j) is set when its center (j + 0.5, i + 0.5) is inside. Edges
    are half-open in y and a crossing counts only strictly right of the
    center, so centers on left or top edges are filled and centers on right
    or bottom edges are not.

    Args:
        poly: Polygon in pixel coordinates
        width: Canvas width in pixels
        height: Canvas height in pixels

    Returns:
        (height, width) uint8 mask
    """
    poly.validate()
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys)
    inside = np.zeros((height, width), dtype=bool)

    points = poly.points
    for k in range(len(points)):
        x1, y1 = points[k]
        x2, y2 = points[(k + 1) % len(points)]
        if y1 == y2:
            continue
        straddles = (y1 > py) != (y2 > py)
        x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= straddles & (px < x_cross)
    return inside.astype(np.uint8)


def full_mask(width: int, height: int) -> np.ndarray:
    return np.ones((height, width), dtype=np.uint8)


def apply_mask(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero every pixel outside the mask."""
    img = as_image(img)
    mask = as_mask(mask)
    if mask.shape != img.shape[:2]:
        raise ShapeMismatchError(f"mask {mask.shape} does not match image {img.shape[:2]}")
    return img * mask[:, :, None]


def _source_coords(out_size: int, in_size: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centers, clamped to the edge samples
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, in_size - 1)
    return lo, hi, src - lo


def resize_bilinear(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """
    Bilinear resize with half-pixel centers (align_corners=False).

    Args:
        img: Image of shape (H, W, C)
        width: Target width
        height: Target height

    Returns:
        Resized image of shape (height, width, C), values in [0, 1]
    """
    img = as_image(img)
    if width < 1 or height < 1:
        raise ValueError(f"target size must be positive, got {width}x{height}")
    in_h, in_w = img.shape[:2]
    y0, y1, wy = _source_coords(height, in_h)
    x0, x1, wx = _source_coords(width, in_w)

    top = img[y0][:, x0] * (1 - wx)[None, :, None] + img[y0][:, x1] * wx[None, :, None]
    bottom = img[y1][:, x0] * (1 - wx)[None, :, None] + img[y1][:, x1] * wx[None, :, None]
    out = top * (1 - wy)[:, None, None] + bottom * wy[:, None, None]
    return np.clip(out, 0.0, 1.0)


def prepare_image(img: np.ndarray, poly: Optional[PolygonMask], size: int) -> np.ndarray:
    """Mask an image at source resolution, then resize it to size x size."""
    img = as_image(img)
    h, w = img.shape[:2]
    mask = full_mask(w, h) if poly is None else rasterize_polygon(poly, w, h)
    return resize_bilinear(apply_mask(img, mask), size, size)


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def split_sizes(n: int, spec: SplitSpec) -> Tuple[int, int, int]:
    """Floor on train, floor on dev, remainder to test."""
    n_train = math.floor(spec.train_frac * n + 1e-9)
    n_dev = math.floor(spec.dev_frac * n + 1e-9)
    return n_train, n_dev, n - n_train - n_dev


def partition_indices(n: int, spec: SplitSpec, stream: RngStream) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random permutation of range(n) cut into train/dev/test index arrays."""
    order = np.asarray(stream.permutation(n), dtype=np.int64)
    n_train, n_dev, _ = split_sizes(n, spec)
    return order[:n_train], order[n_train:n_train + n_dev], order[n_train + n_dev:]


def _assign(samples: Sequence[LabeledSample], groups: Sequence[Tuple[np.ndarray, Split]]) -> List[LabeledSample]:
    assigned = list(samples)
    for indices, split in groups:
        for i in indices:
            assigned[int(i)] = assigned[int(i)].with_split(split)
    return assigned


def _warn_missing_classes(manifest: DatasetManifest, splits: Sequence[Split]) -> None:
    for split, missing in classes_missing_per_split(manifest, splits).items():
        if missing:
            logger.warning("Split '%s' has no samples of: %s", split.value,
                           ", ".join(c.value for c in missing))


def split(manifest: DatasetManifest, spec: SplitSpec, stream: RngStream) -> DatasetManifest:
    """
    Randomly assign every sample to train, dev or test.

    Args:
        manifest: Real samples, none of them assigned to a split yet
        spec: Split fractions
        stream: Random stream driving the permutation

    Returns:
        Manifest with every sample assigned
    """
    assigned = [s for s in manifest.samples if s.split is not None]
    if assigned:
        raise SplitError(f"sample '{assigned[0].id}' already has split '{assigned[0].split.value}'")
    synthetic = [s for s in manifest.samples if s.origin is Origin.SYNTHETIC]
    if synthetic:
        raise SplitError(f"synthetic sample '{synthetic[0].id}' cannot take part in the initial split")

    samples = manifest.samples
    train, dev, test = partition_indices(len(samples), spec, stream)
    result = manifest.with_samples(_assign(samples, [(train, Split.TRAIN), (dev, Split.DEV), (test, Split.TEST)]))
    logger.info("Split %d samples into %d train / %d dev / %d test",
                len(samples), len(train), len(dev), len(test))
    _warn_missing_classes(result, (Split.TRAIN, Split.DEV, Split.TEST))
    return result


def resplit_after_augment(train_dev: DatasetManifest, stream: RngStream,
                          spec: SplitSpec = SplitSpec()) -> DatasetManifest:
    """
    Reassign an augmented train+dev pool back into train and dev.

    Args:
        train_dev: Samples from train/dev (or unassigned synthetic samples), no test samples
        stream: Random stream driving the permutation
        spec: Supplies the train:dev ratio

    Returns:
        Manifest with train = floor(train_parts * n / (train_parts + dev_parts)), rest dev
    """
    test = train_dev.by_split(Split.TEST)
    if test:
        raise SplitError(f"test sample '{test[0].id}' cannot be resplit")

    samples = train_dev.samples
    n = len(samples)
    train_parts, dev_parts = spec.resplit_ratio
    n_train = (train_parts * n) // (train_parts + dev_parts)
    order = np.asarray(stream.permutation(n), dtype=np.int64)
    result = train_dev.with_samples(_assign(samples, [(order[:n_train], Split.TRAIN), (order[n_train:], Split.DEV)]))
    logger.info("Resplit %d samples into %d train / %d dev", n, n_train, n - n_train)
    _warn_missing_classes(result, (Split.TRAIN, Split.DEV))
    return result
