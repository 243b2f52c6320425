from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator
from sklearn.metrics import confusion_matrix

from util.FAConfException import LabelIndexException, MetricException, ShapeException


class ConfusionMatrix(BaseModel):
    """
    Square count matrix, rows = actual class, columns = predicted class.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    counts: np.ndarray

    @field_validator("counts")
    @classmethod
    def _square_counts(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value)
        if value.ndim != 2 or value.shape[0] != value.shape[1] or value.shape[0] == 0:
            raise ShapeException("confusion counts must be a non-empty square matrix", value.shape)
        if value.size and (np.any(value < 0) or not np.all(np.equal(np.mod(value, 1), 0))):
            raise ValueError("confusion counts must be non-negative integers")
        return value.astype(np.int64)

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def actual_counts(self) -> np.ndarray:
        """a_i, the row sums."""
        return self.counts.sum(axis=1)

    def predicted_counts(self) -> np.ndarray:
        """b_i, the column sums."""
        return self.counts.sum(axis=0)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.n_classes != self.n_classes:
            raise ShapeException("cannot add confusion matrices of different size", self.counts.shape,
                                 other.counts.shape)
        return ConfusionMatrix(counts=self.counts + other.counts)


def confusion(preds: Sequence[int], labels: Sequence[int], n_classes: int) -> ConfusionMatrix:
    """
    Tally (actual, predicted) pairs.

    Raises:
        LabelIndexException: For a class outside [0, n_classes).
        ShapeException: If preds and labels differ in length.
    """
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise ShapeException("preds and labels must have equal length", preds.shape, labels.shape)
    for name, values in (("prediction", preds), ("label", labels)):
        bad = values[(values < 0) | (values >= n_classes)]
        if bad.size:
            raise LabelIndexException(f"{name} {int(bad[0])} outside [0, {n_classes})")
    if preds.size == 0:
        return ConfusionMatrix(counts=np.zeros((n_classes, n_classes), dtype=np.int64))
    return ConfusionMatrix(counts=confusion_matrix(labels, preds, labels=list(range(n_classes))))


def accuracy(cm: ConfusionMatrix) -> float:
    """
    Correct over total, trace / n.

    Raises:
        MetricException: For an empty matrix.
    """
    n = cm.n
    if n == 0:
        raise MetricException("accuracy is undefined for n = 0")
    return int(np.trace(cm.counts)) / n


def kappa(cm: ConfusionMatrix) -> float:
    """
    Cohen's kappa (p0 - pe) / (1 - pe) with pe = sum(a_i * b_i) / n^2.
    Numerator and denominator are formed in integers, scaled by n^2, and
    divided once.

    Raises:
        MetricException: For n = 0 or pe = 1.
    """
    n = cm.n
    if n == 0:
        raise MetricException("kappa is undefined for n = 0")
    agreement = sum(int(a) * int(b) for a, b in zip(cm.actual_counts(), cm.predicted_counts()))
    denominator = n * n - agreement
    if denominator == 0:
        raise MetricException("kappa is undefined when chance agreement pe = 1")
    return (int(np.trace(cm.counts)) * n - agreement) / denominator


def row_percent(cm: ConfusionMatrix) -> np.ndarray:
    """Each row as percentages of its actual-class count; rows without trials stay zero."""
    rows = cm.actual_counts().astype(np.float64)[:, None]
    out = np.zeros(cm.counts.shape, dtype=np.float64)
    np.divide(100.0 * cm.counts, rows, out=out, where=rows > 0)
    return out


def confusion_frame(cm: ConfusionMatrix, class_names: Optional[List[str]] = None,
                    percent: bool = False) -> pd.DataFrame:
    """One row per actual class, one column per predicted class."""
    names = class_names or [str(i) for i in range(cm.n_classes)]
    values = row_percent(cm) if percent else cm.counts
    frame = pd.DataFrame(values, index=names, columns=names)
    frame.index.name = "actual"
    return frame
