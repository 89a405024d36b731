"""
Uncertainty Metrics

Responsible for:
- normalized area under the empirical CDF of predictive entropy
- the CDF itself on a fixed grid (plot data)
- ROC / PR AUC of entropy as a score separating correct from incorrect predictions

For ROC and PR the positive class is "correct". The default orientation scores
each sample by -entropy (confident predictions should be the correct ones);
orientation='uncertainty' scores by +entropy instead, which is the convention
some published tables use and maps a ROC AUC a to 1 - a.
"""

from typing import Dict, Optional, Tuple

import numpy as np
from sklearn.metrics import average_precision_score, precision_recall_curve, roc_auc_score, roc_curve

from utils.errors import MetricsError

ORIENTATIONS = ('confidence', 'uncertainty')
ENTROPY_SLACK = 1e-9


def _entropies(entropies, K: int) -> Tuple[np.ndarray, float]:
    if K < 2:
        raise MetricsError(f"need K >= 2, got {K}")
    values = np.asarray(entropies, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise MetricsError("no entropies given")
    top = float(np.log(K))
    if not np.all(np.isfinite(values)) or values.min() < -ENTROPY_SLACK or values.max() > top + ENTROPY_SLACK:
        raise MetricsError(f"entropies must lie in [0, ln {K}] = [0, {top:.6f}]")
    return np.clip(values, 0.0, top), top


def norm_entropy_auc(entropies, K: int) -> float:
    """
    Area under the empirical entropy CDF on [0, ln K], divided by ln K.

    Equals 1 - mean(entropy) / ln K: 1.0 when every prediction is certain,
    0.0 when every prediction is uniform.
    """
    values, top = _entropies(entropies, K)
    return float(1.0 - values.mean() / top)


def entropy_cdf(entropies, K: int, grid: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Empirical CDF of normalized entropy (entropy / ln K) on a grid over [0, 1].

    Returns:
        (grid, cdf): cdf[i] is the fraction of samples with normalized entropy <= grid[i]
    """
    values, top = _entropies(entropies, K)
    grid = np.linspace(0.0, 1.0, 101) if grid is None else np.asarray(grid, dtype=np.float64)
    normalized = np.sort(values / top)
    return grid, np.searchsorted(normalized, grid, side='right') / normalized.size


def _scores(uncertainty, correct, orientation: str) -> Tuple[np.ndarray, np.ndarray]:
    if orientation not in ORIENTATIONS:
        raise MetricsError(f"unknown orientation '{orientation}'")
    uncertainty = np.asarray(uncertainty, dtype=np.float64).reshape(-1)
    correct = np.asarray(correct, dtype=bool).reshape(-1)
    if uncertainty.shape != correct.shape:
        raise MetricsError(f"{uncertainty.shape[0]} scores for {correct.shape[0]} flags")
    if correct.all() or not correct.any():
        raise MetricsError("ROC/PR AUC need both correct and incorrect predictions")
    return (-uncertainty if orientation == 'confidence' else uncertainty), correct


def roc_pr_auc(uncertainty, correct, orientation: str = 'confidence') -> Tuple[float, float]:
    """
    ROC AUC (rank statistic, ties count one half) and PR AUC (step-wise average precision).

    Args:
        uncertainty: Per-sample predictive entropy
        correct: Per-sample correctness flags (positive class)
        orientation: 'confidence' scores by -uncertainty, 'uncertainty' by +uncertainty

    Raises:
        MetricsError: length mismatch or only one class present
    """
    scores, correct = _scores(uncertainty, correct, orientation)
    return float(roc_auc_score(correct, scores)), float(average_precision_score(correct, scores))


def uncertainty_curves(uncertainty, correct, orientation: str = 'confidence') -> Dict[str, np.ndarray]:
    """ROC (fpr, tpr) and PR (recall, precision) curve points for plotting."""
    scores, correct = _scores(uncertainty, correct, orientation)
    fpr, tpr, _ = roc_curve(correct, scores)
    precision, recall, _ = precision_recall_curve(correct, scores)
    return {'fpr': fpr, 'tpr': tpr, 'recall': recall, 'precision': precision}
