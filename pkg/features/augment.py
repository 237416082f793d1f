"""
Offline class balancing and online batch augmentations.

Offline: plan how many synthetic images each diseased class needs so every
class matches the healthy count, then pick them from the generated pool.

Online: rotation and flips per image, and the batched MixUp / CutMix /
Cutout / FMix family, each applied to a whole batch with probability
apply_prob and a mixing weight drawn from a beta distribution.
"""
import base64
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.constants import (
    APPLY_PROB, BETA_FMIX, BETA_MIX, CENTER_MARGIN_FRAC, FLIP_PROB, FMIX_DECAY, ROTATION_RANGE,
)
from Data.types import (
    NUM_CLASSES, ClassLabel, DatasetManifest, LabeledSample, Origin, Split, as_image, check_soft_labels,
)
from features.stats import class_counts
from utils.errors import ConfigError, PlanInfeasibleError, ShapeMismatchError, UsageError
from utils.helpers import sha256_digest
from utils.log import get_logger
from utils.rng import RngStream

logger = get_logger("augment")


class MixMethod(Enum):
    MIXUP = "mixup"
    CUTMIX = "cutmix"
    CUTOUT = "cutout"
    FMIX = "fmix"
    NONE = "none"


BATCHED_METHODS: Tuple[MixMethod, ...] = (MixMethod.MIXUP, MixMethod.CUTMIX, MixMethod.CUTOUT, MixMethod.FMIX)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Batch:
    """N images of equal shape with N soft labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        images = np.array(self.images, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.float64)
        if images.ndim != 4 or images.shape[0] < 1 or images.shape[3] not in (1, 3):
            raise ShapeMismatchError(f"batch images must be (N, H, W, C) with N >= 1, got {images.shape}")
        if labels.shape != (images.shape[0], NUM_CLASSES):
            raise ShapeMismatchError(f"batch labels must be ({images.shape[0]}, {NUM_CLASSES}), got {labels.shape}")
        if images.min() < 0.0 or images.max() > 1.0:
            raise ValueError("batch pixels must lie in [0, 1]")
        check_soft_labels(labels)
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_images(cls, images: Sequence[np.ndarray], labels: Sequence[np.ndarray]) -> "Batch":
        return cls(np.stack([as_image(img) for img in images]), np.stack(labels))

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError(f"beta parameters must be positive, got ({self.alpha}, {self.beta})")


@dataclass(frozen=True)
class AugmentationConfig:
    apply_prob: float = APPLY_PROB
    flip_prob: float = FLIP_PROB
    rotation_range: Tuple[float, float] = ROTATION_RANGE
    beta_mix: BetaParams = BetaParams(*BETA_MIX)
    beta_fmix: BetaParams = BetaParams(*BETA_FMIX)
    fmix_decay: float = FMIX_DECAY
    center_margin_frac: float = CENTER_MARGIN_FRAC

    def __post_init__(self):
        for name in ("apply_prob", "flip_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        low, high = self.rotation_range
        if not 0.0 <= low <= high <= 180.0:
            raise ConfigError(f"rotation_range must lie within [0, 180], got {self.rotation_range}")
        if self.fmix_decay <= 0:
            raise ConfigError(f"fmix_decay must be positive, got {self.fmix_decay}")
        if not 0.0 <= self.center_margin_frac <= 0.5:
            raise ConfigError(f"center_margin_frac must lie in [0, 0.5], got {self.center_margin_frac}")
        object.__setattr__(self, "rotation_range", (float(low), float(high)))

    def beta_for(self, method: MixMethod) -> BetaParams:
        return self.beta_fmix if method is MixMethod.FMIX else self.beta_mix


@dataclass(frozen=True)
class BalancePlan:
    """Number of synthetic samples to add per class."""

    counts: Dict[ClassLabel, int]

    def __post_init__(self):
        if self.counts.get(ClassLabel.HEALTHY, 0) != 0:
            raise ValueError("a balance plan never adds healthy samples")
        if any(n < 0 for n in self.counts.values()):
            raise ValueError("balance plan counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> Dict[str, int]:
        return {c.value: self.counts.get(c, 0) for c in ClassLabel}


@dataclass(frozen=True)
class MixEvent:
    """
    Everything needed to replay one batched augmentation.

    region is (y0, y1, x0, x1) after clipping, for CutMix and Cutout.
    mask is the FMix selector, 1 where the primary image is kept.
    label_weight is the weight the primary label received.
    """

    method: MixMethod
    lam: float
    partner_perm: Tuple[int, ...]
    region: Optional[Tuple[int, int, int, int]] = None
    mask: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    label_weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        perm = tuple(int(i) for i in self.partner_perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("partner_perm must be a permutation of the batch indices")
        object.__setattr__(self, "partner_perm", perm)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=np.uint8)
            mask.setflags(write=False)
            object.__setattr__(self, "mask", mask)

    @classmethod
    def none(cls, n: int) -> "MixEvent":
        return cls(MixMethod.NONE, 1.0, tuple(range(n)))

    @property
    def mask_digest(self) -> Optional[str]:
        if self.mask is None:
            return None
        return sha256_digest(np.ascontiguousarray(self.mask).tobytes())

    def to_json(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "method": self.method.value,
            "lambda": self.lam,
            "label_weight": self.label_weight,
            "permutation": list(self.partner_perm),
            "region": None if self.region is None else list(self.region),
            "mask": None,
            "mask_digest": self.mask_digest,
        }
        if self.mask is not None:
            packed = np.packbits(self.mask.ravel())
            data["mask"] = {
                "shape": list(self.mask.shape),
                "bits": base64.b64encode(packed.tobytes()).decode("ascii"),
            }
        return data

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "MixEvent":
        mask = None
        if data.get("mask") is not None:
            h, w = data["mask"]["shape"]
            packed = np.frombuffer(base64.b64decode(data["mask"]["bits"]), dtype=np.uint8)
            mask = np.unpackbits(packed)[: h * w].reshape(h, w)
            if data.get("mask_digest") and sha256_digest(np.ascontiguousarray(mask).tobytes()) != data["mask_digest"]:
                raise ValueError("FMix mask does not match its digest")
        region = data.get("region")
        return cls(
            method=MixMethod(data["method"]),
            lam=float(data["lambda"]),
            partner_perm=tuple(data["permutation"]),
            region=None if region is None else tuple(int(v) for v in region),
            mask=mask,
            label_weight=float(data.get("label_weight", 1.0)),
        )


# ---------------------------------------------------------------------------
# Offline balancing
# ---------------------------------------------------------------------------

def plan_balance(counts: Dict[ClassLabel, int]) -> BalancePlan:
    """
    Synthetic samples per diseased class needed to match the healthy count.

    Args:
        counts: Current sample count per class

    Returns:
        BalancePlan with plan[c] = counts[healthy] - counts[c]
    """
    full = {c: int(counts.get(c, 0)) for c in ClassLabel}
    if any(n < 0 for n in full.values()):
        raise PlanInfeasibleError(f"class counts must be non-negative, got {full}")
    healthy = full[ClassLabel.HEALTHY]
    too_many = [c for c in ClassLabel.diseased() if full[c] > healthy]
    if too_many:
        raise PlanInfeasibleError(
            f"class '{too_many[0].value}' has {full[too_many[0]]} samples, more than healthy ({healthy}); "
            "generation only maps healthy to diseased"
        )
    plan = {c: (0 if c is ClassLabel.HEALTHY else healthy - full[c]) for c in ClassLabel}
    return BalancePlan(plan)


def select_synthetic(pool: DatasetManifest, label: ClassLabel, count: int,
                     stream: RngStream) -> List[LabeledSample]:
    """
    Pick `count` synthetic samples of one class, uniformly without replacement.

    Returns:
        Selected samples ordered by id
    """
    candidates = [s for s in pool.samples if s.origin is Origin.SYNTHETIC and s.label is label]
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    if count > len(candidates):
        raise PlanInfeasibleError(
            f"synthetic pool has {len(candidates)} '{label.value}' samples, {count} required"
        )
    order = stream.permutation(len(candidates))
    chosen = [candidates[int(i)] for i in order[:count]]
    return sorted(chosen, key=lambda s: s.id)


def balance_manifest(manifest: DatasetManifest, pool: DatasetManifest,
                     stream: RngStream) -> Tuple[DatasetManifest, BalancePlan]:
    """
    Add synthetic samples to the train+dev portion until all classes are equal.

    Test samples are left untouched; added samples carry no split until resplit.
    """
    train_dev = [s for s in manifest.samples if s.split is not Split.TEST]
    plan = plan_balance(class_counts(train_dev))
    added: List[LabeledSample] = []
    for label in ClassLabel.diseased():
        picked = select_synthetic(pool, label, plan.counts[label], stream)
        added.extend(s.with_split(None) for s in picked)
    logger.info("Balance plan %s adds %d synthetic samples", plan.to_dict(), len(added))
    return manifest.with_samples(list(manifest.samples) + added), plan


# ---------------------------------------------------------------------------
# Per-image augmentations
# ---------------------------------------------------------------------------

def sample_beta(p: BetaParams, stream: RngStream) -> float:
    """Draw from Beta(alpha, beta) as g1 / (g1 + g2) of two gamma variates."""
    while True:
        g1 = float(stream.gamma(p.alpha))
        g2 = float(stream.gamma(p.beta))
        total = g1 + g2
        if total > 0.0:
            value = g1 / total
            if 0.0 < value < 1.0:
                return value


def _sample_bilinear_zero(img: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Bilinear sampling at (sx, sy) with zeros outside the image."""
    h, w, c = img.shape
    padded = np.zeros((h + 2, w + 2, c), dtype=np.float64)
    padded[1:-1, 1:-1] = img
    px = sx + 1.0
    py = sy + 1.0
    valid = (px >= 0.0) & (px <= w + 1) & (py >= 0.0) & (py <= h + 1)
    x0 = np.clip(np.floor(px).astype(np.int64), 0, w + 1)
    y0 = np.clip(np.floor(py).astype(np.int64), 0, h + 1)
    x1 = np.minimum(x0 + 1, w + 1)
    y1 = np.minimum(y0 + 1, h + 1)
    wx = np.clip(px - x0, 0.0, 1.0)[..., None]
    wy = np.clip(py - y0, 0.0, 1.0)[..., None]
    top = padded[y0, x0] * (1 - wx) + padded[y0, x1] * wx
    bottom = padded[y1, x0] * (1 - wx) + padded[y1, x1] * wx
    out = top * (1 - wy) + bottom * wy
    out[~valid] = 0.0
    return np.clip(out, 0.0, 1.0)


def rotate_image(img: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate about the image center, bilinear resampling, zero fill."""
    img = as_image(img)
    h, w = img.shape[:2]
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    sx = cos_t * dx + sin_t * dy + cx
    sy = -sin_t * dx + cos_t * dy + cy
    return _sample_bilinear_zero(img, sx, sy)


def rotate_flip(img: np.ndarray, stream: RngStream, cfg: AugmentationConfig = AugmentationConfig()) -> np.ndarray:
    """
    Random rotation in cfg.rotation_range degrees, then horizontal and
    vertical flips with probability cfg.flip_prob each.
    """
    low, high = cfg.rotation_range
    angle = float(stream.uniform(low, high))
    out = rotate_image(img, angle)
    if stream.random() < cfg.flip_prob:
        out = out[:, ::-1]
    if stream.random() < cfg.flip_prob:
        out = out[::-1, :]
    return np.ascontiguousarray(out)


# ---------------------------------------------------------------------------
# Batched augmentations
# ---------------------------------------------------------------------------

def _mix_labels(labels: np.ndarray, perm: Sequence[int], weight: float) -> np.ndarray:
    return weight * labels + (1.0 - weight) * labels[list(perm)]


def mixup(b: Batch, ev: MixEvent) -> Batch:
    """img' = lam * img + (1 - lam) * img[perm], same for labels."""
    perm = list(ev.partner_perm)
    images = np.clip(ev.lam * b.images + (1.0 - ev.lam) * b.images[perm], 0.0, 1.0)
    labels = ev.lam * b.labels + (1.0 - ev.lam) * b.labels[perm]
    return Batch(images, labels)


def square_side(width: int, lam: float) -> int:
    """Side of the cut square: round(W * sqrt(1 - lam)), clamped to [0, W]."""
    side = math.floor(width * math.sqrt(max(0.0, 1.0 - lam)) + 0.5)
    return int(min(max(side, 0), width))


def _center_range(size: int, margin: float) -> Tuple[int, int]:
    low = math.ceil(size * margin)
    high = math.floor(size * (1.0 - margin))
    if high < low:
        low = high = size // 2
    return low, high


def sample_square_center(h: int, w: int, margin: float, stream: RngStream) -> Tuple[int, int]:
    """Integer (cy, cx) with each coordinate in [margin * size, (1 - margin) * size]."""
    y_low, y_high = _center_range(h, margin)
    x_low, x_high = _center_range(w, margin)
    cy = int(stream.integers(y_low, y_high + 1))
    cx = int(stream.integers(x_low, x_high + 1))
    return cy, cx


def square_region(h: int, w: int, side: int, center: Tuple[int, int]) -> Tuple[int, int, int, int]:
    """(y0, y1, x0, x1) of a side x side square at center, clipped to the image."""
    cy, cx = center
    y0, x0 = cy - side // 2, cx - side // 2
    return max(y0, 0), min(y0 + side, h), max(x0, 0), min(x0 + side, w)


def sample_square_region(h: int, w: int, lam: float, margin: float,
                         stream: RngStream) -> Tuple[int, int, int, int]:
    center = sample_square_center(h, w, margin, stream)
    return square_region(h, w, square_side(w, lam), center)


def region_area(region: Tuple[int, int, int, int]) -> int:
    y0, y1, x0, x1 = region
    return max(0, y1 - y0) * max(0, x1 - x0)


def _resolve_region(b: Batch, ev: MixEvent, stream: Optional[RngStream], margin: float) -> Tuple[int, int, int, int]:
    if ev.region is not None:
        return ev.region
    if stream is None:
        raise ValueError(f"{ev.method.value} event has no region and no stream to sample one")
    return sample_square_region(b.height, b.width, ev.lam, margin, stream)


def cutmix(b: Batch, ev: MixEvent, stream: Optional[RngStream] = None,
           center_margin_frac: float = CENTER_MARGIN_FRAC) -> Batch:
    """Paste the partner's square into each image; labels weighted by kept area."""
    y0, y1, x0, x1 = region = _resolve_region(b, ev, stream, center_margin_frac)
    perm = list(ev.partner_perm)
    images = b.images.copy()
    images[:, y0:y1, x0:x1] = b.images[perm][:, y0:y1, x0:x1]
    lam_adj = 1.0 - region_area(region) / float(b.height * b.width)
    return Batch(images, _mix_labels(b.labels, perm, lam_adj))


def cutout(b: Batch, ev: MixEvent, stream: Optional[RngStream] = None,
           center_margin_frac: float = CENTER_MARGIN_FRAC) -> Batch:
    """Zero a square in each image; labels unchanged."""
    y0, y1, x0, x1 = _resolve_region(b, ev, stream, center_margin_frac)
    images = b.images.copy()
    images[:, y0:y1, x0:x1] = 0.0
    return Batch(images, b.labels)


def fmix_ones(lam: float, n: int) -> int:
    """Number of mask pixels set for weight lam: ceil(lam * n)."""
    return int(min(n, max(0, math.ceil(lam * n - 1e-9))))


def fmix_mask(h: int, w: int, lam: float, decay: float, stream: RngStream) -> np.ndarray:
    """
    Binary mask from thresholded low-frequency Fourier noise.

    A complex spectrum with standard-normal parts is attenuated by
    1 / max(f, f0) ** decay, transformed back to a real field, and the
    ceil(lam * h * w) largest values (ties to the lower index) become 1.

    Returns:
        (h, w) uint8 mask
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    freq = np.sqrt(fx ** 2 + fy ** 2)
    nonzero = freq[freq > 0]
    f0 = float(nonzero.min()) if nonzero.size else 1.0
    scale = 1.0 / np.maximum(freq, f0) ** decay

    real = stream.standard_normal(freq.shape)
    imag = stream.standard_normal(freq.shape)
    noise = np.fft.irfft2((real + 1j * imag) * scale, s=(h, w))

    order = np.argsort(-noise.ravel(), kind="stable")
    mask = np.zeros(h * w, dtype=np.uint8)
    mask[order[:fmix_ones(lam, h * w)]] = 1
    return mask.reshape(h, w)


def fmix(b: Batch, ev: MixEvent, stream: Optional[RngStream] = None, decay: float = FMIX_DECAY) -> Batch:
    """Select pixels from each image or its partner by an FMix mask."""
    mask = ev.mask
    if mask is None:
        if stream is None:
            raise ValueError("fmix event has no mask and no stream to sample one")
        mask = fmix_mask(b.height, b.width, ev.lam, decay, stream)
    if mask.shape != (b.height, b.width):
        raise ShapeMismatchError(f"fmix mask {mask.shape} does not match images {(b.height, b.width)}")
    perm = list(ev.partner_perm)
    keep = mask.astype(bool)[None, :, :, None]
    images = np.where(keep, b.images, b.images[perm])
    return Batch(images, _mix_labels(b.labels, perm, float(mask.mean())))


def replay_event(b: Batch, ev: MixEvent) -> Batch:
    """Re-apply a fully resolved event without drawing any randomness."""
    if len(ev.partner_perm) != len(b):
        raise ShapeMismatchError(f"event permutes {len(ev.partner_perm)} items, batch has {len(b)}")
    if ev.method is MixMethod.NONE:
        return b
    if ev.method is MixMethod.MIXUP:
        return mixup(b, ev)
    if ev.method is MixMethod.CUTMIX:
        return cutmix(b, ev)
    if ev.method is MixMethod.CUTOUT:
        return cutout(b, ev)
    return fmix(b, ev)


def apply_batched(b: Batch, cfg: AugmentationConfig, method: MixMethod,
                  stream: RngStream) -> Tuple[Batch, MixEvent]:
    """
    Apply a batched augmentation with probability cfg.apply_prob.

    Returns:
        (batch, event); event.method is NONE when the batch was left unmodified
    """
    n = len(b)
    apply = stream.random() < cfg.apply_prob
    if method is MixMethod.NONE or not apply:
        return b, MixEvent.none(n)

    lam = sample_beta(cfg.beta_for(method), stream)
    perm = tuple(int(i) for i in stream.permutation(n))
    if method is MixMethod.MIXUP:
        ev = MixEvent(method, lam, perm, label_weight=lam)
    elif method in (MixMethod.CUTMIX, MixMethod.CUTOUT):
        region = sample_square_region(b.height, b.width, lam, cfg.center_margin_frac, stream)
        weight = 1.0 - region_area(region) / float(b.height * b.width) if method is MixMethod.CUTMIX else 1.0
        ev = MixEvent(method, lam, perm, region=region, label_weight=weight)
    else:
        mask = fmix_mask(b.height, b.width, lam, cfg.fmix_decay, stream)
        ev = MixEvent(method, lam, perm, mask=mask, label_weight=float(mask.mean()))
    logger.debug("Applied %s with lambda=%.4f", method.value, lam)
    return replay_event(b, ev), ev


# ---------------------------------------------------------------------------
# Augmentation pipelines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AugPipeline:
    """Rotation/flips per image (optional), then one batched method (optional)."""

    rotflip: bool = False
    method: MixMethod = MixMethod.NONE

    @property
    def name(self) -> str:
        parts = (["rotflip"] if self.rotflip else []) + (
            [self.method.value] if self.method is not MixMethod.NONE else [])
        return "+".join(parts) or "none"


VALID_AUG_NAMES: Tuple[str, ...] = ("none", "rotflip") + tuple(m.value for m in BATCHED_METHODS) + tuple(
    f"rotflip+{m.value}" for m in BATCHED_METHODS)


def parse_aug_spec(text: str) -> AugPipeline:
    """Parse names such as "fmix" or "rotflip+cutmix"."""
    name = text.strip().lower()
    if name not in VALID_AUG_NAMES:
        raise UsageError(f"unknown augmentation '{text}'; valid names: {', '.join(VALID_AUG_NAMES)}")
    tokens = name.split("+")
    rotflip = "rotflip" in tokens
    batched = [t for t in tokens if t not in ("rotflip", "none")]
    return AugPipeline(rotflip=rotflip, method=MixMethod(batched[0]) if batched else MixMethod.NONE)


def parse_aug_list(text: str) -> List[AugPipeline]:
    """Comma-separated list of augmentation names."""
    names = [t for t in text.split(",") if t.strip()]
    if not names:
        raise UsageError(f"no augmentation given; valid names: {', '.join(VALID_AUG_NAMES)}")
    return [parse_aug_spec(t) for t in names]


def augment_training_batch(b: Batch, pipeline: AugPipeline, cfg: AugmentationConfig,
                           stream: RngStream) -> Tuple[Batch, MixEvent]:
    """Apply a pipeline to one training batch: rotation/flips first, then the batched method."""
    if pipeline.rotflip:
        b = Batch(np.stack([rotate_flip(img, stream, cfg) for img in b.images]), b.labels)
    return apply_batched(b, cfg, pipeline.method, stream)
