"""
Experiment Commands

One function per CLI command. Each takes a validated RunConfig, writes its
artifacts into config.out with fixed names and returns a CommandResult that
main.py renders:

- checkpoint.bin, train_log.csv       (pretrain, train-edl, finetune, train-risk)
- report.json, records.csv, entropy_cdf.csv, roc.csv, prc.csv   (eval, fuse)
- sweep.csv                           (rotate-sweep)
- gradcheck.csv                       (gradcheck)
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from data.transforms import rotate
from engine import ops
from engine.gradcheck import operator_cases, run_gradcheck
from engine.tensor import Tensor, no_grad
from evidential.checks import loss_cases
from evidential.dirichlet import entropy_of_probs, fuse_batch
from experiments.inputs import load_dataset, load_ood, load_risk, prepare_out_dir, write_train_log
from metrics.classification import accuracy
from metrics.report import EvalReport, evaluate, score_predictions
from models import checkpoint
from models.backbones import BackboneSpec
from models.evidence_model import EvidenceModel
from models.training import (
    finetune_edl,
    pretrain_softmax,
    train_cost_sensitive,
    train_edl,
    train_risk,
)
from utils.config import RunConfig
from utils.errors import ConfigError, ContractError, NumericalError

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    """What a command produced: files, headline numbers and an optional table."""
    command: str
    files: List[Path] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    table: Optional[List[Dict[str, Any]]] = None
    exit_code: int = 0


def _metadata(config: RunConfig, data_name: str) -> Dict[str, Any]:
    return {'command': config.command, 'mode': config.mode, 'epochs': config.epochs, 'lr': config.lr,
            'seed': config.seed, 'act': config.act, 'anneal_T': config.anneal_T, 'kappa': config.kappa,
            'batch_size': config.batch_size, 'dataset': data_name}


def _finish_training(config: RunConfig, model: EvidenceModel, data_name: str) -> CommandResult:
    out = prepare_out_dir(config)
    ckpt = checkpoint.save(model, out / 'checkpoint.bin', _metadata(config, data_name))
    log = write_train_log(model.history, out / 'train_log.csv')
    summary = {'mode': model.mode, 'epochs': len(model.history)}
    if model.history:
        last = model.history[-1]
        summary.update({'loss': last.loss, 'acc': last.acc})
        if last.cost is not None:
            summary['cost'] = last.cost
    return CommandResult(config.command, [ckpt, log], summary)


# ---------------------------------------------------------------------- #
# Training commands
# ---------------------------------------------------------------------- #
def cmd_pretrain(config: RunConfig) -> CommandResult:
    """Softmax (or cost-regularized softmax) pretraining."""
    data = load_dataset(config)
    spec = BackboneSpec.parse(config.backbone)
    if config.mode == 'cs-softmax':
        R = load_risk(config, data.num_classes)
        model = train_cost_sensitive(spec, data, R, config.epochs, config.lr, config.cost_weight,
                                     config.seed, config.batch_size)
    else:
        model = pretrain_softmax(spec, data, config.epochs, config.lr, config.seed, config.batch_size)
    return _finish_training(config, model, data.name)


def cmd_train_edl(config: RunConfig) -> CommandResult:
    data = load_dataset(config)
    model = train_edl(BackboneSpec.parse(config.backbone), data, config.epochs, config.lr, config.act,
                      config.seed, config.anneal_T, config.batch_size)
    return _finish_training(config, model, data.name)


def cmd_finetune(config: RunConfig) -> CommandResult:
    data = load_dataset(config)
    base = checkpoint.load(config.base, num_classes=data.num_classes)
    model = finetune_edl(base, data, config.epochs, config.lr, config.act, config.seed,
                         config.anneal_T, config.batch_size)
    return _finish_training(config, model, data.name)


def cmd_train_risk(config: RunConfig) -> CommandResult:
    """
    riskEDL from scratch (or from --base), or head training with expected
    risk (edl-p) or policy gradient (edl-pg) on a trained EDL checkpoint.
    """
    data = load_dataset(config)
    R = load_risk(config, data.num_classes)
    if config.base is not None:
        model = checkpoint.load(config.base, num_classes=data.num_classes)
    else:
        model = EvidenceModel.create(BackboneSpec.parse(config.backbone), data.feature_shape, data.num_classes,
                                     mode='edl', activation=config.act, seed=config.seed, labels=data.label_ids)
    model = train_risk(model, data, R, config.mode, config.epochs, config.lr, config.kappa, config.seed,
                       config.anneal_T, config.head_init, config.act, config.batch_size)
    return _finish_training(config, model, data.name)


# ---------------------------------------------------------------------- #
# Evaluation commands
# ---------------------------------------------------------------------- #
def _report_result(config: RunConfig, report: EvalReport) -> CommandResult:
    out = prepare_out_dir(config)
    files = [report.to_json(out / 'report.json')] + report.write_tables(out)
    return CommandResult(config.command, files, report.to_dict())


def cmd_eval(config: RunConfig) -> CommandResult:
    """EvalReport of a checkpoint on the configured data, with optional risk matrix and OoD set."""
    data = load_dataset(config)
    model = checkpoint.load(config.ckpt, num_classes=data.num_classes)
    report = evaluate(model, data, load_risk(config, data.num_classes), load_ood(config, data))
    return _report_result(config, report)


def _columns_for(label_ids, fused_labels) -> np.ndarray:
    missing = sorted(set(label_ids) - set(fused_labels))
    if missing or len(fused_labels) != len(label_ids):
        raise ContractError(f"fused label set {sorted(fused_labels)} does not cover the evaluation classes "
                            f"{sorted(label_ids)}")
    return np.array([list(fused_labels).index(label) for label in label_ids])


def fuse_models(model_a: EvidenceModel, model_b: EvidenceModel, samples: np.ndarray):
    """
    Predictive distribution over the union of two models' label sets.

    Evidential models are fused by concatenating their Dirichlet
    concentrations; softmax models by concatenating logits under one softmax.

    Returns:
        (probs, labels): (N, K_A + K_B) probabilities and the original label id of each column
    """
    overlap = set(model_a.labels) & set(model_b.labels)
    if overlap:
        raise ContractError(f"cannot fuse models with overlapping label sets {sorted(overlap)}")
    if model_a.is_evidential != model_b.is_evidential:
        raise ContractError(f"cannot fuse a {model_a.mode} model with a {model_b.mode} model")
    if model_a.is_evidential:
        alpha, labels = fuse_batch(model_a.alpha(samples), model_a.labels, model_b.alpha(samples), model_b.labels)
        return alpha / alpha.sum(axis=1, keepdims=True), labels
    logits = np.concatenate([model_a.logits(samples), model_b.logits(samples)], axis=1)
    with no_grad():
        probs = ops.softmax(Tensor(logits)).data
    return probs, tuple(model_a.labels) + tuple(model_b.labels)


def cmd_fuse(config: RunConfig) -> CommandResult:
    """Fuse two models trained on disjoint label sets and evaluate on the union."""
    data = load_dataset(config)
    model_a, model_b = checkpoint.load(config.ckpt_a), checkpoint.load(config.ckpt_b)
    probs, fused_labels = fuse_models(model_a, model_b, data.samples)
    probs = probs[:, _columns_for(data.label_ids, fused_labels)]

    ood = load_ood(config, data)
    ood_probs = None
    if ood is not None:
        raw, _ = fuse_models(model_a, model_b, ood.samples)
        ood_probs = raw[:, _columns_for(data.label_ids, fused_labels)]
    report = score_predictions(probs, data.labels, data.name, f'fused-{model_a.mode}',
                               load_risk(config, data.num_classes), ood_probs)

    true_ids = np.asarray(data.label_ids)[data.labels]
    for tag, model in (('a', model_a), ('b', model_b)):
        forced = np.asarray(model.labels)[model.predict(data.samples)]
        report.extras[f'forced_accuracy_{tag}'] = accuracy(forced, true_ids)
    report.extras['fused_classes'] = len(fused_labels)
    return _report_result(config, report)


def cmd_rotate_sweep(config: RunConfig) -> CommandResult:
    """Predictive probabilities and entropy of one test image rotated from 0 to 180 degrees."""
    data = load_dataset(config)
    model = checkpoint.load(config.ckpt, num_classes=data.num_classes)
    if not data.is_image:
        raise ConfigError("rotate-sweep needs image data")
    if config.image_index is not None:
        if not 0 <= config.image_index < len(data):
            raise ConfigError(f"--image-index {config.image_index} outside [0, {len(data)})")
        index = config.image_index
    else:
        digit = 1 if config.digit is None else config.digit
        if digit not in data.label_ids:
            raise ConfigError(f"digit {digit} is not among the dataset classes {list(data.label_ids)}")
        index = data.first_of_class(data.label_ids.index(digit))

    angles = np.arange(0, 181, config.angle_step)
    batch = np.stack([rotate(data.samples[index], float(angle)) for angle in angles])
    probs = model.predictive(batch)
    entropy = entropy_of_probs(probs)
    frame = pd.DataFrame(probs, columns=[f'p{label}' for label in model.labels])
    frame.insert(0, 'angle', angles)
    frame['entropy'] = entropy

    out = prepare_out_dir(config)
    path = out / 'sweep.csv'
    frame.to_csv(path, index=False)
    summary = {'image_index': int(index), 'label': int(data.label_ids[data.labels[index]]),
               'entropy_0': float(entropy[0])}
    if 90 in angles:
        summary['entropy_90'] = float(entropy[list(angles).index(90)])
    return CommandResult(config.command, [path], summary)


def cmd_gradcheck(config: RunConfig, instances: int = 100) -> CommandResult:
    """Finite-difference check of every operator and loss head; exit code 4 on any failure."""
    results = run_gradcheck(operator_cases() + loss_cases(), instances=instances, seed=config.seed)
    table = [{'operator': r.name, 'instances': r.instances, 'max_rel_error': r.max_rel_error,
              'passed': r.passed, 'error': '; '.join(r.errors)} for r in results]
    out = prepare_out_dir(config)
    path = out / 'gradcheck.csv'
    pd.DataFrame(table).to_csv(path, index=False)
    failed = [r.name for r in results if not r.passed]
    summary = {'operators': len(results), 'failed': len(failed)}
    return CommandResult(config.command, [path], summary, table,
                         NumericalError.exit_code if failed else 0)


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig], CommandResult]] = {
    'pretrain': cmd_pretrain,
    'train-edl': cmd_train_edl,
    'finetune': cmd_finetune,
    'train-risk': cmd_train_risk,
    'fuse': cmd_fuse,
    'rotate-sweep': cmd_rotate_sweep,
    'eval': cmd_eval,
    'gradcheck': cmd_gradcheck,
}


def run_command(config: RunConfig) -> CommandResult:
    """Validate the config and dispatch to its command."""
    config.validate()
    logger.info(f"Running {config.command} (seed={config.seed}, out={config.out})")
    return COMMAND_HANDLERS[config.command](config)
