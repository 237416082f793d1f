"""
Objectives of the segmentation (pix2pix) and generation (CycleGAN) models.

The networks themselves are not part of this project; the losses are pure
functions over image batches, discriminator patch maps and black-box
mappings. Expectations over the data distributions are batch means.
"""
import math
import os
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np

from config.constants import (
    CYCLE_WEIGHT, CYCLEGAN_EPOCHS, CYCLEGAN_PATCH_RECEPTIVE_FIELD, CYCLEGAN_RESIDUAL_BLOCKS, GAN_ADAM_BETAS,
    GAN_ADAM_LR, GAN_BATCH_SIZE, IDENTITY_WEIGHT, PIX2PIX_EPOCHS, PIX2PIX_L1_WEIGHT, PIX2PIX_PATCH_OUTPUT,
    PREDICTION_EPS,
)
from Data.io import load_json, read_png
from utils.errors import ConfigError, DataError, NonFiniteError, PredictionDomainError, ShapeMismatchError
from utils.helpers import to_significant
from utils.log import get_logger

logger = get_logger("ganloss")

MappingHandle = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GanLossWeights:
    pix2pix_l1: float = PIX2PIX_L1_WEIGHT
    cycle: float = CYCLE_WEIGHT
    identity: float = IDENTITY_WEIGHT

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"GAN loss weight '{name}' must be finite and non-negative, got {value}")


@dataclass(frozen=True)
class GanTrainingConstants:
    """Training setup of the generative models, recorded for reference only."""

    adam_lr: float = GAN_ADAM_LR
    adam_beta1: float = GAN_ADAM_BETAS[0]
    adam_beta2: float = GAN_ADAM_BETAS[1]
    batch_size: int = GAN_BATCH_SIZE
    pix2pix_epochs: int = PIX2PIX_EPOCHS
    cyclegan_epochs: int = CYCLEGAN_EPOCHS
    residual_blocks: int = CYCLEGAN_RESIDUAL_BLOCKS
    pix2pix_patch_output: int = PIX2PIX_PATCH_OUTPUT
    cyclegan_receptive_field: int = CYCLEGAN_PATCH_RECEPTIVE_FIELD

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GanTrainingConstants":
        return cls(**data)


@dataclass(frozen=True)
class DomainBatch:
    """Images from domain X (healthy) and domain Y (diseased), each (N, H, W, C)."""

    batch_x: np.ndarray
    batch_y: np.ndarray

    def __post_init__(self):
        for name in ("batch_x", "batch_y"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 4 or arr.shape[0] < 1:
                raise ShapeMismatchError(f"{name} must be a non-empty (N, H, W, C) batch, got {arr.shape}")
            object.__setattr__(self, name, arr)


def _as_batch(a: np.ndarray) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    return arr


def l1_loss(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over the batch of each image's mean absolute difference."""
    a, b = _as_batch(a), _as_batch(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    per_image = np.abs(a - b).reshape(a.shape[0], -1).mean(axis=1)
    return float(per_image.mean())


def clamp_predictions(pred: np.ndarray, eps: float = PREDICTION_EPS) -> np.ndarray:
    """Clamp raw discriminator outputs into [eps, 1 - eps]."""
    return np.clip(np.asarray(pred, dtype=np.float64), eps, 1.0 - eps)


def _check_predictions(pred: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(pred, dtype=np.float64)
    if arr.size == 0:
        raise PredictionDomainError(f"{name}: empty prediction map")
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise PredictionDomainError(f"{name}: predictions must lie strictly inside (0, 1)")
    return arr


def gan_loss_discriminator(real: np.ndarray, fake: np.ndarray) -> float:
    """Cross-entropy discriminator loss: -mean(log real) - mean(log(1 - fake))."""
    real = _check_predictions(real, "real")
    fake = _check_predictions(fake, "fake")
    return float(-np.mean(np.log(real)) - np.mean(np.log1p(-fake)))


def gan_loss_generator(fake: np.ndarray) -> float:
    """Non-saturating generator loss: -mean(log fake)."""
    fake = _check_predictions(fake, "fake")
    return float(-np.mean(np.log(fake)))


def _map_batch(handle: MappingHandle, batch: np.ndarray, name: str) -> np.ndarray:
    out = []
    for img in batch:
        mapped = np.asarray(handle(img), dtype=np.float64)
        if mapped.shape != img.shape:
            raise ShapeMismatchError(f"mapping {name} changed image shape {img.shape} to {mapped.shape}")
        out.append(mapped)
    return np.stack(out)


def cycle_loss(G: MappingHandle, F: MappingHandle, d: DomainBatch) -> float:
    """E_x |F(G(x)) - x|_1 + E_y |G(F(y)) - y|_1."""
    x_cycle = _map_batch(F, _map_batch(G, d.batch_x, "G"), "F")
    y_cycle = _map_batch(G, _map_batch(F, d.batch_y, "F"), "G")
    return l1_loss(x_cycle, d.batch_x) + l1_loss(y_cycle, d.batch_y)


def identity_loss(G: MappingHandle, F: MappingHandle, d: DomainBatch) -> float:
    """E_x |F(x) - x|_1 + E_y |G(y) - y|_1."""
    return l1_loss(_map_batch(F, d.batch_x, "F"), d.batch_x) + l1_loss(_map_batch(G, d.batch_y, "G"), d.batch_y)


def _check_finite(**components: float) -> None:
    for name, value in components.items():
        if not math.isfinite(value):
            raise NonFiniteError(f"loss component '{name}' is not finite: {value}")


def cyclegan_total(gan_xy: float, gan_yx: float, cyc: float, idt: float,
                   w: GanLossWeights = GanLossWeights()) -> float:
    """gan_xy + gan_yx + lambda1 * cyc + lambda2 * idt."""
    _check_finite(gan_xy=gan_xy, gan_yx=gan_yx, cyc=cyc, idt=idt)
    return gan_xy + gan_yx + w.cycle * cyc + w.identity * idt


def pix2pix_total(gan: float, l1: float, w: GanLossWeights = GanLossWeights()) -> float:
    """gan + lambda * l1."""
    _check_finite(gan=gan, l1=l1)
    return gan + w.pix2pix_l1 * l1


# ---------------------------------------------------------------------------
# Named mappings and fixture evaluation
# ---------------------------------------------------------------------------

def named_mapping(spec: str) -> MappingHandle:
    """
    Build a mapping from its name.

    Args:
        spec: "identity", "zero", "invert", "offset:<v>" or "scale:<v>"

    Returns:
        Callable image -> image of the same shape
    """
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    if name == "identity" and not arg:
        return lambda img: img
    if name == "zero" and not arg:
        return np.zeros_like
    if name == "invert" and not arg:
        return lambda img: 1.0 - img
    if name in ("offset", "scale") and arg:
        try:
            value = float(arg)
        except ValueError:
            raise ConfigError(f"invalid mapping argument in '{spec}'") from None
        if name == "offset":
            return lambda img: img + value
        return lambda img: img * value
    raise ConfigError(f"unknown mapping '{spec}'; use identity, zero, invert, offset:<v> or scale:<v>")


def _load_png_batch(directory: str) -> np.ndarray:
    if not os.path.isdir(directory):
        raise DataError(f"image batch directory not found: {directory}")
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(".png"))
    if not names:
        raise DataError(f"no PNG images in {directory}")
    images = [read_png(os.path.join(directory, n)) for n in names]
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"images in {directory} differ in size: {sorted(shapes)}")
    return np.stack(images)


def _prediction(predictions: Dict[str, Any], key: str) -> Optional[np.ndarray]:
    if key not in predictions:
        return None
    return np.asarray(predictions[key], dtype=np.float64)


def evaluate_gan_fixture(directory: str, weights: Optional[GanLossWeights] = None) -> Dict[str, float]:
    """
    Compute every loss term for a fixture directory.

    Layout:
        x/*.png, y/*.png           domain batches
        mappings.json              {"G": "<mapping>", "F": "<mapping>"} (default identity)
        predictions.json           optional patch maps: d_y_real, d_y_fake, d_x_real, d_x_fake
        weights.json               optional GanLossWeights fields
        pix2pix/target/*.png, pix2pix/generated/*.png and pix2pix/predictions.json
                                   optional, with d_real and d_fake

    Returns:
        Loss terms rounded to 9 significant digits
    """
    if weights is None:
        weights_path = os.path.join(directory, "weights.json")
        weights = GanLossWeights(**load_json(weights_path)) if os.path.isfile(weights_path) else GanLossWeights()

    mappings_path = os.path.join(directory, "mappings.json")
    mappings = load_json(mappings_path) if os.path.isfile(mappings_path) else {}
    G = named_mapping(mappings.get("G", "identity"))
    F = named_mapping(mappings.get("F", "identity"))

    batches = DomainBatch(_load_png_batch(os.path.join(directory, "x")), _load_png_batch(os.path.join(directory, "y")))
    terms: Dict[str, float] = {
        "cycle": cycle_loss(G, F, batches),
        "identity": identity_loss(G, F, batches),
    }

    predictions_path = os.path.join(directory, "predictions.json")
    predictions = load_json(predictions_path) if os.path.isfile(predictions_path) else {}
    d_y_real, d_y_fake = _prediction(predictions, "d_y_real"), _prediction(predictions, "d_y_fake")
    d_x_real, d_x_fake = _prediction(predictions, "d_x_real"), _prediction(predictions, "d_x_fake")
    if d_y_fake is not None and d_x_fake is not None:
        terms["gan_xy_generator"] = gan_loss_generator(d_y_fake)
        terms["gan_yx_generator"] = gan_loss_generator(d_x_fake)
        terms["cyclegan_total"] = cyclegan_total(
            terms["gan_xy_generator"], terms["gan_yx_generator"], terms["cycle"], terms["identity"], weights)
        if d_y_real is not None:
            terms["gan_xy_discriminator"] = gan_loss_discriminator(d_y_real, d_y_fake)
        if d_x_real is not None:
            terms["gan_yx_discriminator"] = gan_loss_discriminator(d_x_real, d_x_fake)

    pix_dir = os.path.join(directory, "pix2pix")
    if os.path.isdir(pix_dir):
        l1 = l1_loss(_load_png_batch(os.path.join(pix_dir, "generated")),
                     _load_png_batch(os.path.join(pix_dir, "target")))
        pix_predictions = load_json(os.path.join(pix_dir, "predictions.json"))
        if "d_real" not in pix_predictions or "d_fake" not in pix_predictions:
            raise DataError(f"{pix_dir}/predictions.json needs d_real and d_fake")
        terms["pix2pix_l1"] = l1
        terms["pix2pix_generator"] = gan_loss_generator(np.asarray(pix_predictions["d_fake"]))
        terms["pix2pix_discriminator"] = gan_loss_discriminator(
            np.asarray(pix_predictions["d_real"]), np.asarray(pix_predictions["d_fake"]))
        terms["pix2pix_total"] = pix2pix_total(terms["pix2pix_generator"], l1, weights)

    logger.info("Evaluated %d loss terms from %s", len(terms), directory)
    return {k: to_significant(v, 9) for k, v in sorted(terms.items())}
