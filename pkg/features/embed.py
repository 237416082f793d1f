"""
Exact t-SNE over feature vectors.

Gaussian affinities with a per-row bandwidth found by binary search on the
perplexity, Student-t affinities in 2-D, and momentum gradient descent with
early exaggeration. Everything is O(N^2) in memory and time.
"""
import math
import os
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist, squareform

from config.constants import (
    TSNE_DUPLICATE_JITTER, TSNE_EXAGGERATION, TSNE_EXAGGERATION_ITERS, TSNE_INIT_STD, TSNE_ITERATIONS,
    TSNE_LEARNING_RATE, TSNE_MAX_POINTS, TSNE_MAX_SEARCH_ITERS, TSNE_MOMENTUM_EARLY, TSNE_MOMENTUM_LATE,
    TSNE_PERPLEXITY, TSNE_PERPLEXITY_TOL, TSNE_Q_FLOOR,
)
from utils.errors import ConfigError, DataError, NonFiniteError, PerplexityError, ShapeMismatchError
from utils.log import get_logger
from utils.rng import stage_stream

logger = get_logger("embed")

TSNE_COLUMNS = ("id", "x", "y", "label", "origin")
MIN_GAIN = 0.01


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = TSNE_PERPLEXITY
    iterations: int = TSNE_ITERATIONS
    learning_rate: float = TSNE_LEARNING_RATE
    momentum_early: float = TSNE_MOMENTUM_EARLY
    momentum_late: float = TSNE_MOMENTUM_LATE
    momentum_switch: int = TSNE_EXAGGERATION_ITERS
    early_exaggeration: float = TSNE_EXAGGERATION
    exaggeration_iters: int = TSNE_EXAGGERATION_ITERS
    seed: int = 0

    def __post_init__(self):
        for name in ("perplexity", "learning_rate", "early_exaggeration"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"t-SNE {name} must be positive, got {getattr(self, name)}")
        if self.iterations < 1:
            raise ConfigError(f"t-SNE iterations must be positive, got {self.iterations}")
        for name in ("momentum_early", "momentum_late"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"t-SNE {name} must lie in [0, 1), got {getattr(self, name)}")
        if self.momentum_switch < 0 or self.exaggeration_iters < 0:
            raise ConfigError("t-SNE iteration thresholds must be non-negative")


@dataclass(frozen=True)
class TsneResult:
    coords: np.ndarray
    kl_trace: Tuple[float, ...]


def squared_distances(x: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances computed from direct differences."""
    return np.maximum(squareform(pdist(x, metric="sqeuclidean")), 0.0)


def row_perplexity(row: np.ndarray) -> float:
    """exp of the Shannon entropy (nats) of a probability row, 0 log 0 = 0."""
    p = row[row > 0]
    return math.exp(float(-(p * np.log(p)).sum()))


def _row_probs(dist: np.ndarray, beta: float) -> np.ndarray:
    p = np.exp(-(dist - dist.min()) * beta)
    return p / p.sum()


def _search_row(dist: np.ndarray, perplexity: float, row: int) -> np.ndarray:
    positive = dist[dist > 0]
    beta = 1.0 / positive.mean() if positive.size else 1.0
    lo, hi = 0.0, math.inf
    achieved = math.nan
    for _ in range(TSNE_MAX_SEARCH_ITERS):
        p = _row_probs(dist, beta)
        achieved = row_perplexity(p)
        if abs(achieved - perplexity) < TSNE_PERPLEXITY_TOL:
            return p
        if achieved > perplexity:
            lo = beta
            beta = beta * 2.0 if hi == math.inf else (beta + hi) / 2.0
        else:
            hi = beta
            beta = (beta + lo) / 2.0
    raise PerplexityError(row, perplexity, achieved)


def conditional_affinities(x: np.ndarray, perplexity: float) -> np.ndarray:
    """
    Row-stochastic Gaussian affinities with per-row bandwidths.

    Args:
        x: (N, D) feature vectors, N >= 4
        perplexity: Target perplexity, below N

    Returns:
        (N, N) matrix with zero diagonal and rows summing to 1
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatchError(f"features must be (N, D), got {x.shape}")
    n = x.shape[0]
    if n < 4:
        raise DataError(f"t-SNE needs at least 4 points, got {n}")
    if not 0 < perplexity < n:
        raise ConfigError(f"perplexity must lie in (0, {n}), got {perplexity}")
    if not np.isfinite(x).all():
        raise NonFiniteError("t-SNE input rows must be finite")

    d = squared_distances(x)
    p = np.zeros((n, n))
    others = ~np.eye(n, dtype=bool)
    for i in range(n):
        p[i, others[i]] = _search_row(d[i, others[i]], perplexity, i)
    return p


def symmetrize(p_cond: np.ndarray) -> np.ndarray:
    """Joint affinities (P + P^T) / 2N."""
    n = p_cond.shape[0]
    return (p_cond + p_cond.T) / (2.0 * n)


def _student_t(y: np.ndarray) -> np.ndarray:
    num = 1.0 / (1.0 + squared_distances(y))
    np.fill_diagonal(num, 0.0)
    return num


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    num = _student_t(y)
    q = np.maximum(num / num.sum(), TSNE_Q_FLOOR)
    mask = p > 0
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def kl_and_gradient(p: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    KL(P || Q) and its gradient with respect to the 2-D coordinates.

    Args:
        p: (N, N) joint affinities
        y: (N, 2) coordinates

    Returns:
        (kl, gradient of shape (N, 2))
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1] or y.shape[0] != p.shape[0]:
        raise ShapeMismatchError(f"affinities {p.shape} do not match coordinates {y.shape}")
    num = _student_t(y)
    q = num / num.sum()
    mask = p > 0
    kl = float((p[mask] * np.log(p[mask] / np.maximum(q[mask], TSNE_Q_FLOOR))).sum())
    w = (p - q) * num
    grad = 4.0 * (w.sum(axis=1)[:, None] * y - w @ y)
    return kl, grad


def jitter_duplicates(x: np.ndarray, seed: int) -> np.ndarray:
    """Nudge repeated rows by a tiny seeded offset so bandwidth search stays well posed."""
    _, first = np.unique(x, axis=0, return_index=True)
    duplicate = np.ones(x.shape[0], dtype=bool)
    duplicate[first] = False
    count = int(duplicate.sum())
    if not count:
        return x
    logger.warning("Jittering %d duplicate feature rows by %g", count, TSNE_DUPLICATE_JITTER)
    noise = stage_stream(seed, "tsne/jitter").standard_normal(size=(count, x.shape[1]))
    out = x.copy()
    out[duplicate] += TSNE_DUPLICATE_JITTER * noise
    return out


def tsne(x: np.ndarray, cfg: TsneConfig = TsneConfig()) -> TsneResult:
    """
    Embed feature vectors in 2-D.

    Args:
        x: (N, D) feature vectors, 4 <= N <= 5000
        cfg: Optimizer settings and seed

    Returns:
        TsneResult with centred coordinates and the per-iteration KL (without exaggeration)
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatchError(f"features must be (N, D), got {x.shape}")
    n = x.shape[0]
    if n > TSNE_MAX_POINTS:
        raise DataError(f"exact t-SNE is capped at {TSNE_MAX_POINTS} points, got {n}")

    p = symmetrize(conditional_affinities(jitter_duplicates(x, cfg.seed), cfg.perplexity))
    y = stage_stream(cfg.seed, "tsne/init").normal(0.0, TSNE_INIT_STD, size=(n, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    trace: List[float] = []

    for it in range(cfg.iterations):
        exaggeration = cfg.early_exaggeration if it < cfg.exaggeration_iters else 1.0
        momentum = cfg.momentum_early if it < cfg.momentum_switch else cfg.momentum_late
        _, grad = kl_and_gradient(p * exaggeration, y)
        same_sign = np.sign(grad) == np.sign(update)
        gains = np.maximum(np.where(same_sign, gains * 0.8, gains + 0.2), MIN_GAIN)
        update = momentum * update - cfg.learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
        trace.append(kl_divergence(p, y))
        if not math.isfinite(trace[-1]):
            raise NonFiniteError(f"t-SNE diverged at iteration {it}")
        if it % 100 == 0:
            logger.debug("t-SNE iteration %d KL=%.6f", it, trace[-1])

    logger.info("t-SNE embedded %d points, final KL %.4f", n, trace[-1])
    return TsneResult(y, tuple(trace))


def write_tsne_csv(path: str, ids: Sequence[str], coords: np.ndarray, labels: Sequence[str],
                   origins: Sequence[str]) -> None:
    """Write id,x,y,label,origin rows."""
    if not len(ids) == coords.shape[0] == len(labels) == len(origins):
        raise ShapeMismatchError("ids, coordinates, labels and origins must have equal length")
    frame = pd.DataFrame({
        "id": list(ids), "x": coords[:, 0], "y": coords[:, 1], "label": list(labels), "origin": list(origins),
    }, columns=list(TSNE_COLUMNS))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.9g")


def read_tsne_csv(path: str) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"id": str})
    missing = [c for c in TSNE_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    return frame
