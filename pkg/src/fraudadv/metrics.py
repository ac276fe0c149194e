"""Confusion-matrix metrics with fraud (label 1) as the positive class."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise DataError("confusion matrix cells must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    matrix: ConfusionMatrix
    n: int
    # set when the metric's denominator was zero and the value is a convention
    precision_undefined: bool = False
    recall_undefined: bool = False

    def to_dict(self) -> dict:
        d = {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "confusion_matrix": self.matrix.to_dict(),
            "n": self.n,
        }
        if self.precision_undefined or self.recall_undefined:
            d["undefined"] = [k for k, flag in (("precision", self.precision_undefined),
                                                ("recall", self.recall_undefined)) if flag]
        return d

    def row(self) -> str:
        return (f"accuracy={self.accuracy:.2f} precision={self.precision:.2f} "
                f"recall={self.recall:.2f}")


def confusion_matrix(predictions, labels) -> ConfusionMatrix:
    p = np.asarray(predictions).reshape(-1)
    t = np.asarray(labels).reshape(-1)
    if p.shape != t.shape:
        raise DataError(f"{len(p)} predictions but {len(t)} labels")
    for name, arr in (("predictions", p), ("labels", t)):
        if not np.all((arr == 0) | (arr == 1)):
            raise DataError(f"{name} must be binary 0/1")
    p = p.astype(bool)
    t = t.astype(bool)
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return ConfusionMatrix(tp=tp, fp=fp, tn=len(p) - tp - fp - fn, fn=fn)


def summarize(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy, precision and recall; an empty denominator yields 0 and a flag."""
    n = cm.n
    if n == 0:
        raise DataError("cannot summarize an empty confusion matrix")
    pos_pred = cm.tp + cm.fp
    pos_true = cm.tp + cm.fn
    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / n,
        precision=cm.tp / pos_pred if pos_pred else 0.0,
        recall=cm.tp / pos_true if pos_true else 0.0,
        matrix=cm,
        n=n,
        precision_undefined=pos_pred == 0,
        recall_undefined=pos_true == 0,
    )


def evaluate(model, X, y) -> MetricsReport:
    """Score any object with a batch ``predict(X)`` method."""
    return summarize(confusion_matrix(model.predict(X), y))


def transferability_rate(successful: int, attempted: int) -> float:
    if attempted < 1:
        raise DataError("transferability rate needs at least one attempted sample")
    if not 0 <= successful <= attempted:
        raise DataError(f"successful={successful} outside [0, attempted={attempted}]")
    return successful / attempted
