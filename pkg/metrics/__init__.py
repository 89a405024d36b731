"""
Metrics Module

Accuracy, misclassification cost, entropy-CDF AUC, ROC/PR AUC of entropy
as an uncertainty score, and the evaluation report.
"""

from .classification import accuracy, avg_cost
from .uncertainty import norm_entropy_auc, entropy_cdf, roc_pr_auc, uncertainty_curves
from .report import EvalReport, score_predictions, evaluate

__all__ = [
    'accuracy',
    'avg_cost',
    'norm_entropy_auc',
    'entropy_cdf',
    'roc_pr_auc',
    'uncertainty_curves',
    'EvalReport',
    'score_predictions',
    'evaluate',
]
