"""
End-to-end tests of the CLI commands on synthetic and small IDX data.
"""

import json
import sys

import numpy as np
import pandas as pd
import pytest

import main
from experiments.commands import cmd_gradcheck, run_command
from experiments.inputs import LOG_COLUMNS
from models import checkpoint
from utils.config import RunConfig
from utils.errors import ConfigError, ContractError

SYNTH = 'blobs:K=4,n=40,sigma=0.3'


def make_config(command, out, **flags):
    flags.setdefault('seed', 0)
    flags.setdefault('backbone', 'mlp:8')
    return RunConfig.from_sources(command, {'out': str(out), **flags}, environ={}, use_dotenv=False)


def train(tmp_path, name, command='train-edl', **flags):
    flags.setdefault('synth', SYNTH)
    flags.setdefault('epochs', 5)
    flags.setdefault('lr', 1e-2)
    run_command(make_config(command, tmp_path / name, **flags))
    return tmp_path / name / 'checkpoint.bin'


class TestTrainingCommands:
    def test_train_edl_writes_checkpoint_and_log(self, tmp_path):
        result = run_command(make_config('train-edl', tmp_path / 'edl', synth=SYNTH, epochs=3, lr=1e-2))
        assert [path.name for path in result.files] == ['checkpoint.bin', 'train_log.csv']
        log = pd.read_csv(tmp_path / 'edl' / 'train_log.csv')
        assert list(log.columns) == LOG_COLUMNS
        assert list(log['epoch']) == [1, 2, 3]
        np.testing.assert_allclose(log['lambda'], [0.1, 0.2, 0.3])
        assert log['cost'].isna().all()
        header = checkpoint.read_header(result.files[0])
        assert header['mode'] == 'edl' and header['metadata']['seed'] == 0

    def test_identical_runs_give_identical_checkpoints(self, tmp_path):
        first = train(tmp_path, 'a').read_bytes()
        second = train(tmp_path, 'b').read_bytes()
        assert first == second

    def test_pretrain_then_finetune(self, tmp_path):
        base = train(tmp_path, 'soft', command='pretrain')
        assert checkpoint.read_header(base)['mode'] == 'softmax'
        result = run_command(make_config('finetune', tmp_path / 'tuned', synth=SYNTH, base=str(base), epochs=2))
        assert result.summary['mode'] == 'edl'
        assert checkpoint.read_header(result.files[0])['activation'] == 'clamped-exp'

    def test_cost_sensitive_pretrain_logs_cost(self, tmp_path):
        train(tmp_path, 'cs', command='pretrain', mode='cs-softmax', risk_matrix='mnist')
        log = pd.read_csv(tmp_path / 'cs' / 'train_log.csv')
        assert log['cost'].notna().all()

    def test_train_risk_head_on_base(self, tmp_path):
        base = train(tmp_path, 'edl')
        result = run_command(make_config('train-risk', tmp_path / 'p', synth=SYNTH, base=str(base),
                                         mode='edl-p', risk_matrix='mnist', epochs=3))
        header = checkpoint.read_header(result.files[0])
        assert header['mode'] == 'edl-p' and header['head'] is True
        assert header['frozen'] == ['backbone', 'logits']
        assert checkpoint.load(result.files[0]).digest() == checkpoint.load(base).digest()

    def test_risk_edl_from_scratch(self, tmp_path):
        result = run_command(make_config('train-risk', tmp_path / 'r', synth=SYNTH, mode='risk-edl',
                                         risk_matrix='mnist', epochs=2, lr=1e-2))
        assert result.summary['mode'] == 'risk-edl'
        assert 'cost' in result.summary

    def test_head_mode_without_base_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            run_command(make_config('train-risk', tmp_path / 'x', synth=SYNTH, mode='edl-p', risk_matrix='mnist'))


class TestEvaluationCommands:
    def test_eval_report(self, tmp_path):
        ckpt = train(tmp_path, 'edl', epochs=10)
        result = run_command(make_config('eval', tmp_path / 'eval', synth=SYNTH, ckpt=str(ckpt), ood='synth'))
        report = json.loads((tmp_path / 'eval' / 'report.json').read_text())
        assert report['num_samples'] == 160 and report['num_classes'] == 4
        assert 'entropy_auc_ood' in report and 'avg_cost' not in report
        assert result.summary['accuracy'] == report['accuracy']

    def test_eval_with_risk_matrix(self, tmp_path):
        ckpt = train(tmp_path, 'edl')
        run_command(make_config('eval', tmp_path / 'eval', synth=SYNTH, ckpt=str(ckpt), risk_matrix='mnist'))
        report = json.loads((tmp_path / 'eval' / 'report.json').read_text())
        assert 'avg_cost' in report and 'entropy_auc_ood' not in report

    def test_eval_checks_class_count(self, tmp_path):
        ckpt = train(tmp_path, 'edl')
        with pytest.raises(checkpoint.CheckpointShapeError):
            run_command(make_config('eval', tmp_path / 'eval', synth='blobs:K=3,n=10', ckpt=str(ckpt)))

    def test_fuse_disjoint_halves(self, tmp_path):
        ckpt_a = train(tmp_path, 'a', classes='0,1', epochs=10)
        ckpt_b = train(tmp_path, 'b', classes='2,3', epochs=10)
        result = run_command(make_config('fuse', tmp_path / 'fused', synth=SYNTH,
                                         ckpt_a=str(ckpt_a), ckpt_b=str(ckpt_b)))
        extras = result.summary['extras']
        assert extras['fused_classes'] == 4
        assert extras['forced_accuracy_a'] <= 0.5 and extras['forced_accuracy_b'] <= 0.5
        assert result.summary['mode'] == 'fused-edl' and result.summary['num_classes'] == 4
        records = pd.read_csv(tmp_path / 'fused' / 'records.csv')
        assert set(records['pred']) <= {0, 1, 2, 3}

    def test_fuse_with_itself_rejected(self, tmp_path):
        ckpt = train(tmp_path, 'a', classes='0,1')
        with pytest.raises(ContractError):
            run_command(make_config('fuse', tmp_path / 'fused', synth=SYNTH, ckpt_a=str(ckpt), ckpt_b=str(ckpt)))

    def test_fuse_rejects_mixed_models(self, tmp_path):
        ckpt_a = train(tmp_path, 'a', classes='0,1')
        ckpt_b = train(tmp_path, 'b', command='pretrain', classes='2,3')
        with pytest.raises(ContractError):
            run_command(make_config('fuse', tmp_path / 'f', synth=SYNTH, ckpt_a=str(ckpt_a), ckpt_b=str(ckpt_b)))

    def test_rotate_sweep(self, tmp_path, idx_files):
        images, labels = (str(path) for path in idx_files)
        ckpt = train(tmp_path, 'img', synth=None, data_images=images, data_labels=labels, epochs=2)
        result = run_command(make_config('rotate-sweep', tmp_path / 'sweep', data_images=images,
                                         data_labels=labels, ckpt=str(ckpt)))
        sweep = pd.read_csv(tmp_path / 'sweep' / 'sweep.csv')
        assert list(sweep['angle']) == list(range(0, 181, 10))
        assert list(sweep.columns) == ['angle'] + [f'p{k}' for k in range(10)] + ['entropy']
        np.testing.assert_allclose(sweep[[f'p{k}' for k in range(10)]].sum(axis=1), 1.0)
        assert result.summary['label'] == 1 and 'entropy_90' in result.summary

        model = checkpoint.load(ckpt)
        from data.idx import load_idx
        data = load_idx(*idx_files)
        plain = model.predictive(data.samples[result.summary['image_index']][None])
        np.testing.assert_allclose(sweep.iloc[0][[f'p{k}' for k in range(10)]].to_numpy(dtype=float), plain[0])

    def test_rotate_sweep_image_index_range(self, tmp_path, idx_files):
        images, labels = (str(path) for path in idx_files)
        ckpt = train(tmp_path, 'img', synth=None, data_images=images, data_labels=labels, epochs=1)
        with pytest.raises(ConfigError):
            run_command(make_config('rotate-sweep', tmp_path / 's', data_images=images, data_labels=labels,
                                    ckpt=str(ckpt), image_index=400))


class TestGradcheckCommand:
    def test_passes_and_writes_table(self, tmp_path):
        config = make_config('gradcheck', tmp_path / 'gc')
        result = cmd_gradcheck(config.validate(), instances=3)
        assert result.exit_code == 0
        table = pd.read_csv(tmp_path / 'gc' / 'gradcheck.csv')
        assert table['passed'].all()
        assert {'softmax', 'matmul', 'conv2d_same', 'max_pool2d'} <= set(table['operator'])


class TestMain:
    def run_main(self, monkeypatch, tmp_path, *argv):
        monkeypatch.chdir(tmp_path)
        for name in ('EDL_OUTPUT_DIR', 'EDL_DATA_DIR', 'EDL_BATCH_SIZE'):
            monkeypatch.delenv(name, raising=False)
        monkeypatch.setattr(sys, 'argv', ['main.py', *argv])
        with pytest.raises(SystemExit) as exit_info:
            main.main()
        return exit_info.value.code

    def test_success(self, monkeypatch, tmp_path):
        code = self.run_main(monkeypatch, tmp_path, 'train-edl', '--synth', 'blobs:K=2,n=10',
                             '--epochs', '1', '--seed', '0', '--backbone', 'mlp:4', '--out', 'run')
        assert code == 0
        assert (tmp_path / 'run' / 'checkpoint.bin').exists()

    def test_missing_seed_is_config_error(self, monkeypatch, tmp_path):
        assert self.run_main(monkeypatch, tmp_path, 'train-edl', '--synth', 'blobs') == 2

    def test_head_mode_without_base(self, monkeypatch, tmp_path):
        code = self.run_main(monkeypatch, tmp_path, 'train-risk', '--mode', 'edl-p', '--synth', 'blobs',
                             '--risk-matrix', 'mnist', '--seed', '0')
        assert code == 2

    def test_malformed_idx_is_data_error(self, monkeypatch, tmp_path):
        (tmp_path / 'bad-images').write_bytes(b'\x00\x00\x08\x01' + bytes(20))
        (tmp_path / 'bad-labels').write_bytes(b'\x00\x00\x08\x01\x00\x00\x00\x00')
        code = self.run_main(monkeypatch, tmp_path, 'train-edl', '--data-images', 'bad-images',
                             '--data-labels', 'bad-labels', '--seed', '0')
        assert code == 3

    def test_no_command_prints_help(self, monkeypatch, tmp_path):
        assert self.run_main(monkeypatch, tmp_path) == 0
