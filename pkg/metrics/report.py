"""
Evaluation Report

Scores predictive distributions on a labelled set (and optionally an
out-of-distribution set) and collects the results in an EvalReport that
serializes to JSON, plus plot-ready tables:

- records.csv      index,label,pred,entropy,cost,correct
- entropy_cdf.csv  entropy,correct,incorrect,ood
- roc.csv / prc.csv  fpr,tpr / recall,precision
"""

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from data.dataset import Dataset
from evidential.dirichlet import entropy_of_probs
from evidential.risk import RiskMatrix
from metrics.classification import accuracy, avg_cost
from metrics.uncertainty import entropy_cdf, norm_entropy_auc, roc_pr_auc, uncertainty_curves
from utils.errors import MetricsError

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ['index', 'label', 'pred', 'entropy', 'cost', 'correct']
_AUC_FIELDS = ('entropy_auc_correct', 'entropy_auc_incorrect', 'entropy_auc_ood',
               'roc_auc', 'pr_auc', 'roc_auc_uncertainty', 'pr_auc_uncertainty')


@dataclass
class EvalReport:
    """
    Evaluation summary. Optional fields are None (and left out of the JSON)
    when their inputs are missing: avg_cost without a risk matrix,
    entropy_auc_ood without OoD data, ROC/PR without both outcomes.
    """
    dataset: str
    mode: str
    num_samples: int
    num_classes: int
    accuracy: float
    avg_cost: Optional[float] = None
    entropy_auc_correct: Optional[float] = None
    entropy_auc_incorrect: Optional[float] = None
    entropy_auc_ood: Optional[float] = None
    roc_auc: Optional[float] = None
    pr_auc: Optional[float] = None
    roc_auc_uncertainty: Optional[float] = None
    pr_auc_uncertainty: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict)
    labels: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    preds: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    entropy: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    costs: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    ood_entropy: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def validate(self) -> 'EvalReport':
        """Check AUCs and accuracy lie in [0, 1] and avg_cost is non-negative."""
        for name in _AUC_FIELDS + ('accuracy',):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise MetricsError(f"{name}={value} outside [0, 1]")
        if self.avg_cost is not None and self.avg_cost < 0:
            raise MetricsError(f"avg_cost={self.avg_cost} is negative")
        return self

    @property
    def correct(self) -> np.ndarray:
        return self.preds == self.labels

    def to_dict(self) -> dict:
        """JSON shape: summary fields only, None values omitted."""
        out = {}
        for item in fields(self):
            value = getattr(self, item.name)
            if isinstance(value, np.ndarray) or value is None or (item.name == 'extras' and not value):
                continue
            out[item.name] = value
        return out

    def to_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
        return path

    def records_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'index': np.arange(self.num_samples),
            'label': self.labels,
            'pred': self.preds,
            'entropy': self.entropy,
            'cost': self.costs if self.costs is not None else [None] * self.num_samples,
            'correct': self.correct.astype(int),
        }, columns=RECORD_COLUMNS)

    def entropy_cdf_frame(self) -> pd.DataFrame:
        """Normalized-entropy CDFs of the correct, incorrect and OoD subsets on a shared grid."""
        grid = np.linspace(0.0, 1.0, 101)
        columns = {'entropy': grid}
        subsets = {'correct': self.entropy[self.correct], 'incorrect': self.entropy[~self.correct],
                   'ood': self.ood_entropy}
        for name, values in subsets.items():
            columns[name] = (entropy_cdf(values, self.num_classes, grid)[1]
                             if values is not None and values.size else [None] * grid.size)
        return pd.DataFrame(columns, columns=['entropy', 'correct', 'incorrect', 'ood'])

    def curve_frames(self) -> Optional[Tuple[pd.DataFrame, pd.DataFrame]]:
        """(roc, prc) tables, or None when only one outcome occurred."""
        if self.roc_auc is None:
            return None
        curves = uncertainty_curves(self.entropy, self.correct)
        return (pd.DataFrame({'fpr': curves['fpr'], 'tpr': curves['tpr']}),
                pd.DataFrame({'recall': curves['recall'], 'precision': curves['precision']}))

    def write_tables(self, out_dir: Union[str, Path]) -> List[Path]:
        """Write records.csv, entropy_cdf.csv and, when defined, roc.csv and prc.csv."""
        out_dir = Path(out_dir)
        written = [out_dir / 'records.csv', out_dir / 'entropy_cdf.csv']
        self.records_frame().to_csv(written[0], index=False)
        self.entropy_cdf_frame().to_csv(written[1], index=False)
        frames = self.curve_frames()
        if frames is not None:
            for name, frame in zip(('roc.csv', 'prc.csv'), frames):
                frame.to_csv(out_dir / name, index=False)
                written.append(out_dir / name)
        return written


def _subset_auc(entropies: np.ndarray, K: int) -> Optional[float]:
    return norm_entropy_auc(entropies, K) if entropies.size else None


def score_predictions(probs: np.ndarray, labels: np.ndarray, name: str, mode: str,
                      risk: Optional[RiskMatrix] = None, ood_probs: Optional[np.ndarray] = None,
                      preds: Optional[np.ndarray] = None) -> EvalReport:
    """
    Build an EvalReport from predictive probabilities.

    Args:
        probs: (N, K) predictive distributions
        labels: (N,) true classes
        name: Dataset name for the report
        mode: Model mode for the report
        risk: Optional risk matrix (adds avg_cost and per-sample costs)
        ood_probs: Optional (M, K) predictive distributions on OoD inputs
        preds: Hard decisions; argmax of probs when omitted
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    K = probs.shape[1]
    preds = np.argmax(probs, axis=1) if preds is None else np.asarray(preds, dtype=np.int64)
    entropy = entropy_of_probs(probs)
    correct = preds == labels

    report = EvalReport(dataset=name, mode=mode, num_samples=int(labels.shape[0]), num_classes=K,
                        accuracy=accuracy(preds, labels),
                        entropy_auc_correct=_subset_auc(entropy[correct], K),
                        entropy_auc_incorrect=_subset_auc(entropy[~correct], K),
                        labels=labels, preds=preds, entropy=entropy)
    if risk is not None:
        report.avg_cost = avg_cost(preds, labels, risk)
        report.costs = risk.values[labels, preds]
    if ood_probs is not None:
        report.ood_entropy = entropy_of_probs(np.asarray(ood_probs, dtype=np.float64))
        report.entropy_auc_ood = _subset_auc(report.ood_entropy, K)
    if correct.any() and not correct.all():
        report.roc_auc, report.pr_auc = roc_pr_auc(entropy, correct)
        report.roc_auc_uncertainty, report.pr_auc_uncertainty = roc_pr_auc(entropy, correct, 'uncertainty')
    else:
        logger.warning(f"{name}: all predictions {'correct' if correct.all() else 'incorrect'}, ROC/PR AUC undefined")
    return report.validate()


def evaluate(model, data: Dataset, risk: Optional[RiskMatrix] = None, ood: Optional[Dataset] = None) -> EvalReport:
    """Evaluate a model's decisions and predictive entropy on data (and optional OoD data)."""
    if len(data) == 0:
        raise MetricsError(f"cannot evaluate on empty dataset '{data.name}'")
    if model.num_classes != data.num_classes:
        raise MetricsError(f"model has K={model.num_classes} outputs but '{data.name}' has {data.num_classes} classes")
    probs = model.predictive(data.samples)
    ood_probs = model.predictive(ood.samples) if ood is not None and len(ood) else None
    return score_predictions(probs, data.labels, data.name, model.mode, risk, ood_probs,
                             preds=model.predict(data.samples))
