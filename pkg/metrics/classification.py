"""
Classification Scores

Accuracy and average misclassification cost of hard decisions.
"""

import numpy as np

from evidential.risk import RiskMatrix
from utils.errors import MetricsError


def _pair(preds, labels):
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise MetricsError(f"{preds.shape[0]} predictions for {labels.shape[0]} labels")
    if preds.size == 0:
        raise MetricsError("no predictions to score")
    return preds, labels


def accuracy(preds, labels) -> float:
    """Fraction of exact matches."""
    preds, labels = _pair(preds, labels)
    return float(np.mean(preds == labels))


def avg_cost(preds, labels, R: RiskMatrix) -> float:
    """Mean of R[label][pred] over the samples."""
    preds, labels = _pair(preds, labels)
    if max(preds.max(), labels.max()) >= R.K or min(preds.min(), labels.min()) < 0:
        raise MetricsError(f"class index outside the {R.K}x{R.K} risk matrix")
    return float(np.mean(R.values[labels, preds]))
