"""Classification metrics: accuracy, macro/weighted F1, confusion matrix."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np


@dataclass
class MetricsReport:
    accuracy: float
    f1_macro: float
    f1_weighted: float
    confusion: List[List[int]]
    per_class: List[Dict[str, float]]
    labels: Optional[List[str]] = None

    def to_dict(self):
        return asdict(self)


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predictions."""
    yt = np.asarray(y_true, dtype=int)
    yp = np.asarray(y_pred, dtype=int)
    if yt.shape != yp.shape:
        raise ValueError("y_true and y_pred differ in length")
    for arr in (yt, yp):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError("label outside the model's label set")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (yt, yp), 1)
    return cm


def report_from_confusion(cm, labels: Optional[List[str]] = None) -> MetricsReport:
    cm = np.asarray(cm, dtype=np.int64)
    total = cm.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    per_class = [
        {"precision": float(p), "recall": float(r), "f1": float(f), "support": int(s)}
        for p, r, f, s in zip(precision, recall, f1, support)
    ]
    return MetricsReport(
        accuracy=float(tp.sum() / total),
        f1_macro=float(f1.mean()),
        f1_weighted=float((f1 * support).sum() / support.sum()),
        confusion=cm.tolist(),
        per_class=per_class,
        labels=labels,
    )


def classification_report(y_true, y_pred, n_classes: int, labels=None) -> MetricsReport:
    return report_from_confusion(confusion_matrix(y_true, y_pred, n_classes), labels)
