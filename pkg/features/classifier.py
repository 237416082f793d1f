"""
Reference classifier: multinomial logistic regression over 32x32 grayscale
features, trained on soft labels with mini-batch gradient descent.
"""
import os
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from config.constants import (
    FEATURE_SIZE, LUMA_WEIGHTS, STD_FLOOR, TRAIN_BATCH_SIZE, TRAIN_EPOCHS, TRAIN_INITIAL_LR,
    TRAIN_LR_DECAY, TRAIN_LR_DECAY_EVERY,
)
from Data.types import NUM_CLASSES, as_image, check_soft_labels
from features.dataprep import resize_bilinear
from utils.errors import ConfigError, DataError, ShapeMismatchError, TrainingDivergedError
from utils.log import get_logger
from utils.rng import stage_stream

logger = get_logger("classifier")

# (batch indices, epoch, batch number) -> (raw features, soft labels) for that batch
BatchHook = Callable[[np.ndarray, int, int], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = TRAIN_BATCH_SIZE
    epochs: int = TRAIN_EPOCHS
    initial_lr: float = TRAIN_INITIAL_LR
    lr_decay: float = TRAIN_LR_DECAY
    lr_decay_every: int = TRAIN_LR_DECAY_EVERY
    seed: int = 0

    def __post_init__(self):
        for name in ("batch_size", "epochs", "lr_decay_every"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if not self.initial_lr > 0:
            raise ConfigError(f"initial_lr must be positive, got {self.initial_lr}")
        if not self.lr_decay > 0:
            raise ConfigError(f"lr_decay must be positive, got {self.lr_decay}")

    def lr_at(self, epoch: int) -> float:
        return self.initial_lr * self.lr_decay ** (epoch // self.lr_decay_every)


@dataclass(frozen=True)
class RefClassifier:
    """Weights of shape (feature_dim + 1, 5), last row is the bias."""

    weights: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    @property
    def feature_dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def zeros(cls, feature_dim: int) -> "RefClassifier":
        return cls(
            np.zeros((feature_dim + 1, NUM_CLASSES)),
            np.zeros(feature_dim),
            np.ones(feature_dim),
        )

    def design(self, features: np.ndarray) -> np.ndarray:
        """Standardize features and append the bias column.

        Dimensions that were constant in training (std at the floor) map to 0,
        so augmented batches cannot blow them up.
        """
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.feature_dim:
            raise ShapeMismatchError(f"expected features of dimension {self.feature_dim}, got shape {x.shape}")
        varying = self.std > STD_FLOOR
        scaled = np.where(varying, (x - self.mean) / self.std, 0.0)
        return _with_bias(scaled)

    def save(self, path: str) -> None:
        """Write the model as an npz archive, creating parent directories."""
        try:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            np.savez(path, weights=self.weights, mean=self.mean, std=self.std)
        except OSError as e:
            raise DataError(f"cannot write model to {path}: {e}") from None

    @classmethod
    def load(cls, path: str) -> "RefClassifier":
        with np.load(path) as data:
            return cls(data["weights"], data["mean"], data["std"])


def extract_features(img: np.ndarray) -> np.ndarray:
    """Resize to 32x32, convert to luma and flatten to 1024 values."""
    img = as_image(img)
    small = resize_bilinear(img, FEATURE_SIZE, FEATURE_SIZE)
    if small.shape[2] == 1:
        gray = small[:, :, 0]
    else:
        gray = small @ np.asarray(LUMA_WEIGHTS, dtype=np.float64)
    return gray.reshape(-1)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _with_bias(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def standardization_stats(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(features, dtype=np.float64)
    return x.mean(axis=0), np.maximum(x.std(axis=0), STD_FLOOR)


def loss_and_gradient(weights: np.ndarray, design: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean soft-target cross-entropy and its gradient with respect to the weights.

    Args:
        weights: (d + 1, 5) weight matrix
        design: (n, d + 1) standardized features with bias column
        targets: (n, 5) soft labels

    Returns:
        (loss, gradient of the same shape as weights)
    """
    logits = design @ weights
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = design.shape[0]
    loss = float(-(targets * log_probs).sum() / n)
    grad = design.T @ (np.exp(log_probs) - targets) / n
    return loss, grad


def predict_scores(model: RefClassifier, features: np.ndarray) -> np.ndarray:
    """Softmax class probabilities, one row per sample."""
    return softmax(model.design(features) @ model.weights)


def _check_training_data(features: np.ndarray, labels: np.ndarray) -> None:
    if features.ndim != 2 or features.shape[0] == 0:
        raise DataError(f"training needs at least one feature vector, got shape {features.shape}")
    if labels.shape[0] != features.shape[0]:
        raise ShapeMismatchError(f"{features.shape[0]} feature vectors for {labels.shape[0]} labels")
    check_soft_labels(labels)
    if not np.isfinite(features).all():
        raise DataError("training features must be finite")


def train_ref(features: np.ndarray, soft_labels: np.ndarray, cfg: TrainConfig,
              batch_hook: Optional[BatchHook] = None, stage: str = "train",
              dev: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> RefClassifier:
    """
    Train the reference classifier.

    Args:
        features: (n, d) raw feature vectors; standardization stats come from these
        soft_labels: (n, 5) target distributions
        cfg: Batch size, epochs and learning-rate schedule
        batch_hook: Optional source of augmented (features, labels) per mini-batch
        stage: Names the shuffle streams so separate models draw independently
        dev: Optional (features, labels) whose accuracy is logged every epoch

    Returns:
        Trained RefClassifier
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(soft_labels, dtype=np.float64)
    _check_training_data(x, y)

    mean, std = standardization_stats(x)
    model = RefClassifier(np.zeros((x.shape[1] + 1, NUM_CLASSES)), mean, std)
    full = model.design(x)
    weights = model.weights.copy()
    initial_loss, _ = loss_and_gradient(weights, full, y)
    n = x.shape[0]

    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = np.asarray(stage_stream(cfg.seed, stage, epoch).permutation(n), dtype=np.int64)
        epoch_loss = 0.0
        for batch_no, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            if batch_hook is None:
                bx, by = full[idx], y[idx]
            else:
                raw, by = batch_hook(idx, epoch, batch_no)
                bx = model.design(raw)
            loss, grad = loss_and_gradient(weights, bx, by)
            if not np.isfinite(loss) or not np.isfinite(grad).all():
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, batch {batch_no}")
            weights -= lr * grad
            epoch_loss += loss * len(idx)
        logger.debug("epoch %d lr=%.6g loss=%.6f", epoch, lr, epoch_loss / n)
        if dev is not None and len(dev[0]):
            trained = RefClassifier(weights.copy(), mean, std)
            acc = _dev_accuracy(trained, dev[0], dev[1])
            logger.debug("epoch %d dev accuracy=%.1f%%", epoch, acc)

    final_loss, _ = loss_and_gradient(weights, full, y)
    if not np.isfinite(final_loss) or final_loss > initial_loss + 1e-12:
        raise TrainingDivergedError(
            f"training loss rose from {initial_loss:.6f} to {final_loss:.6f}; lower the learning rate"
        )
    logger.info("Trained reference classifier on %d samples: loss %.4f -> %.4f", n, initial_loss, final_loss)
    return RefClassifier(weights, mean, std)


def _dev_accuracy(model: RefClassifier, features: np.ndarray, labels: np.ndarray) -> float:
    scores = predict_scores(model, features)
    return 100.0 * float(np.mean(scores.argmax(axis=1) == np.asarray(labels).argmax(axis=1)))

