from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

METRIC_NAMES = ("auc", "accuracy", "precision", "recall", "f1")


class MetricError(ValueError):
    pass


def _check_binary(labels) -> np.ndarray:
    y = np.asarray(labels).astype(np.int64)
    n1 = int((y == 1).sum())
    n0 = int((y == 0).sum())
    if n1 + n0 != y.size:
        raise MetricError("labels must be 0/1")
    if n1 == 0 or n0 == 0:
        raise MetricError("both classes must be present")
    return y


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative, ties counted half."""
    y = _check_binary(labels)
    s = np.asarray(scores, dtype=float)
    if s.shape != y.shape:
        raise MetricError("scores and labels differ in length")
    n1 = int(y.sum())
    n0 = y.size - n1
    ranks = rankdata(s)
    return float((ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


@dataclass(frozen=True)
class MetricSet:
    auc: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    no_positive_predictions: bool = False

    def as_dict(self):
        return asdict(self)


def classification_metrics(scores, labels, threshold: float = 0.5) -> MetricSet:
    """AUC plus confusion-matrix metrics at ``score >= threshold``.

    With no predicted positives precision and F1 are set to 0 and the
    ``no_positive_predictions`` flag is raised.
    """
    y = _check_binary(labels)
    s = np.asarray(scores, dtype=float)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    recall = tp / (tp + fn)
    degenerate = tp + fp == 0
    precision = 0.0 if degenerate else tp / (tp + fp)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricSet(
        auc=roc_auc(s, y),
        accuracy=(tp + tn) / y.size,
        precision=precision,
        recall=recall,
        f1=f1,
        no_positive_predictions=degenerate,
    )
