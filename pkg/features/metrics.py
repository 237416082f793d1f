"""
Multiclass metrics: confusion matrix, macro-averaged scores, top-k accuracy.

All scores are percentages. Precision or recall of a class with a zero
denominator counts as 0 and the class is flagged on the report.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from config.constants import REPORT_COLUMNS
from Data.io import export_to_csv
from Data.types import NUM_CLASSES, ClassLabel
from utils.errors import DataError, ShapeMismatchError
from utils.helpers import format_percentage


@dataclass(frozen=True)
class MacroScores:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy_macro_ovr: float
    zero_division_classes: Tuple[ClassLabel, ...] = ()


@dataclass(frozen=True)
class EvalReport:
    """One report row; every score is a percentage in [0, 100]."""

    method: str
    accuracy: float
    top2_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy_macro_ovr: float
    zero_division_classes: Tuple[ClassLabel, ...] = field(default=(), compare=False)

    def __post_init__(self):
        for name in ("accuracy", "top2_accuracy", "macro_precision", "macro_recall", "macro_f1",
                     "accuracy_macro_ovr"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0 + 1e-9:
                raise ValueError(f"{name} must lie in [0, 100], got {value}")
        if self.top2_accuracy + 1e-9 < self.accuracy:
            raise ValueError("top-2 accuracy cannot be below accuracy")

    def to_row(self) -> Dict[str, str]:
        return {
            "method": self.method,
            "accuracy": format_percentage(self.accuracy),
            "top2_accuracy": format_percentage(self.top2_accuracy),
            "precision": format_percentage(self.macro_precision),
            "recall": format_percentage(self.macro_recall),
            "f1": format_percentage(self.macro_f1),
            "accuracy_macro_ovr": format_percentage(self.accuracy_macro_ovr),
        }


def confusion(preds: Sequence[ClassLabel], truths: Sequence[ClassLabel]) -> np.ndarray:
    """
    5x5 confusion matrix, rows = true class, columns = predicted class.

    Args:
        preds: Predicted labels
        truths: True labels, same length

    Returns:
        Integer count matrix
    """
    if len(preds) != len(truths):
        raise ShapeMismatchError(f"{len(preds)} predictions for {len(truths)} labels")
    if not preds:
        raise DataError("cannot build a confusion matrix from zero samples")
    return confusion_matrix(
        [t.index for t in truths], [p.index for p in preds], labels=list(range(NUM_CLASSES))
    ).astype(np.int64)


def _label_vectors(cm: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Expand a count matrix back into (true, predicted) index vectors."""
    counts = np.rint(cm).astype(np.int64)
    rows, cols = np.indices(counts.shape)
    return np.repeat(rows.ravel(), counts.ravel()), np.repeat(cols.ravel(), counts.ravel())


def macro_metrics(cm: np.ndarray) -> MacroScores:
    """Accuracy, macro precision/recall/F1 and mean one-vs-rest accuracy, as percentages."""
    cm = np.asarray(cm, dtype=np.float64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ShapeMismatchError(f"confusion matrix must be square, got {cm.shape}")
    total = cm.sum()
    if (cm < 0).any():
        raise DataError("confusion matrix has negative counts")
    if total <= 0:
        raise DataError("confusion matrix is empty")

    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = total - tp - fp - fn
    y_true, y_pred = _label_vectors(cm)
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=list(range(cm.shape[0])), average=None, zero_division=0
    )

    flagged = tuple(
        ClassLabel.from_index(i) for i in range(cm.shape[0])
        if i < NUM_CLASSES and (tp[i] + fp[i] == 0 or tp[i] + fn[i] == 0)
    )
    return MacroScores(
        accuracy=100.0 * tp.sum() / total,
        macro_precision=100.0 * precision.mean(),
        macro_recall=100.0 * recall.mean(),
        macro_f1=100.0 * f1.mean(),
        accuracy_macro_ovr=100.0 * ((tp + tn) / total).mean(),
        zero_division_classes=flagged,
    )


def topk_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k highest scores per row, ties to the lower index."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), axis=1, kind="stable")
    return order[:, :k]


def topk_accuracy(scores: np.ndarray, truths: Sequence[ClassLabel], k: int) -> float:
    """Percentage of samples whose true class is among the k highest scores."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 1 <= k <= NUM_CLASSES:
        raise ValueError(f"k must lie in [1, {NUM_CLASSES}], got {k}")
    if scores.ndim != 2 or scores.shape != (len(truths), NUM_CLASSES):
        raise ShapeMismatchError(f"scores must be ({len(truths)}, {NUM_CLASSES}), got {scores.shape}")
    if not len(truths):
        raise DataError("cannot compute accuracy over zero samples")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    top = topk_indices(scores, k)
    hits = (top == np.array([t.index for t in truths])[:, None]).any(axis=1)
    return 100.0 * hits.mean()


def argmax_labels(scores: np.ndarray) -> List[ClassLabel]:
    return [ClassLabel.from_index(int(i)) for i in topk_indices(scores, 1)[:, 0]]


def build_report(method: str, scores: np.ndarray, truths: Sequence[ClassLabel]) -> EvalReport:
    """Evaluate score vectors against true labels."""
    macro = macro_metrics(confusion(argmax_labels(scores), truths))
    return EvalReport(
        method=method,
        accuracy=macro.accuracy,
        top2_accuracy=topk_accuracy(scores, truths, 2),
        macro_precision=macro.macro_precision,
        macro_recall=macro.macro_recall,
        macro_f1=macro.macro_f1,
        accuracy_macro_ovr=macro.accuracy_macro_ovr,
        zero_division_classes=macro.zero_division_classes,
    )


def write_report_csv(reports: Sequence[EvalReport], path: str) -> None:
    """Write reports as CSV with one decimal per percentage."""
    export_to_csv([r.to_row() for r in reports], path, REPORT_COLUMNS)
