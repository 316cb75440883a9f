"""Classification metrics: accuracy, per-class F1, macro F1, confusion matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

NUM_STAGES = 5
STAGE_NAMES = ("Wake", "N1", "N2", "N3", "REM")


@dataclass
class MetricsReport:
    accuracy: float
    macro_f1: float
    per_class_f1: list[float]
    confusion: np.ndarray  # (5, 5) counts, rows = truth
    absent_classes: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class_f1": list(self.per_class_f1),
            "confusion": self.confusion.tolist(),
            "absent_classes": list(self.absent_classes),
        }


def confusion_matrix(truth: np.ndarray, preds: np.ndarray) -> np.ndarray:
    matrix = np.zeros((NUM_STAGES, NUM_STAGES), dtype=np.int64)
    np.add.at(matrix, (truth, preds), 1)
    return matrix


def compute_metrics(preds, truth) -> MetricsReport:
    """Accuracy, per-class F1 and macro F1 over the 5 stage classes.

    A class absent from both truth and predictions contributes F1 = 0 to the
    macro mean (fixed 5-way divisor) and is flagged in ``absent_classes``.
    """
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise ShapeError(
            f"preds {preds.shape} and truth {truth.shape} must be equal-length 1-D"
        )
    if preds.size == 0:
        raise ShapeError("empty prediction set")
    if ((preds < 0) | (preds >= NUM_STAGES) | (truth < 0) | (truth >= NUM_STAGES)).any():
        raise ShapeError("labels must lie in 0..4")
    matrix = confusion_matrix(truth, preds)
    total = matrix.sum()
    accuracy = float(np.trace(matrix) / total)
    f1s = []
    absent = []
    for c in range(NUM_STAGES):
        tp = matrix[c, c]
        fp = matrix[:, c].sum() - tp
        fn = matrix[c, :].sum() - tp
        if tp + fp + fn == 0:
            absent.append(c)
            f1s.append(0.0)
            continue
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        f1s.append(float(f1))
    return MetricsReport(
        accuracy=accuracy,
        macro_f1=float(np.mean(f1s)),
        per_class_f1=f1s,
        confusion=matrix,
        absent_classes=absent,
    )
