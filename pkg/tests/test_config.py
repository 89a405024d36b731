"""
Tests for RunConfig layering and validation.
"""

import json

import pytest

from utils.config import RISK_EPOCHS, RunConfig, load_config_file, parse_classes
from utils.errors import ConfigError


def build(command, flags=None, config_path=None, environ=None):
    return RunConfig.from_sources(command, flags or {}, config_path, environ=environ or {}, use_dotenv=False)


class TestLayering:
    def test_command_defaults(self):
        config = build('finetune')
        assert (config.epochs, config.lr, config.act, config.mode) == (10, 1e-5, 'clamped-exp', 'edl')

    @pytest.mark.parametrize('mode', sorted(RISK_EPOCHS))
    def test_risk_epochs_follow_mode(self, mode):
        assert build('train-risk', {'mode': mode}).epochs == RISK_EPOCHS[mode]

    def test_precedence(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text(json.dumps({'out': 'from-file', 'batch_size': 16, 'epochs': 3}))
        environ = {'EDL_OUTPUT_DIR': 'from-env', 'EDL_BATCH_SIZE': '8', 'EDL_DATA_DIR': '/data'}
        config = build('train-edl', {'epochs': 7, 'lr': None}, str(path), environ)
        assert config.out == 'from-file'
        assert config.batch_size == 16
        assert config.epochs == 7
        assert config.lr == 1e-3
        assert config.data_dir == '/data'
        assert config.sources['epochs'] == 'flag' and config.sources['data_dir'] == '$EDL_DATA_DIR'

    def test_yaml_file(self, tmp_path):
        path = tmp_path / 'run.yaml'
        path.write_text("synth: blobs:K=3\nseed: 4\nclasses: [0, 2]\nanneal-T: 5\n")
        config = build('train-edl', config_path=str(path))
        assert config.seed == 4 and config.classes == (0, 2) and config.anneal_T == 5

    def test_unknown_key(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text(json.dumps({'learning_rate': 0.1}))
        with pytest.raises(ConfigError, match='learning_rate'):
            build('pretrain', config_path=str(path))

    def test_bad_environment_value(self):
        with pytest.raises(ConfigError):
            build('pretrain', environ={'EDL_BATCH_SIZE': 'many'})

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            build('serve')

    def test_config_file_must_be_mapping(self, tmp_path):
        path = tmp_path / 'list.json'
        path.write_text('[1, 2]')
        with pytest.raises(ConfigError):
            load_config_file(str(path))

    def test_relative_paths_use_data_dir(self):
        config = build('eval', environ={'EDL_DATA_DIR': '/data'})
        assert str(config.resolve_path('train-images')) == '/data/train-images'
        assert str(config.resolve_path('/abs/file')) == '/abs/file'


class TestValidation:
    def test_seed_required(self):
        with pytest.raises(ConfigError, match='seed'):
            build('train-edl', {'synth': 'blobs:K=3'}).validate()

    def test_gradcheck_seed_defaults(self):
        assert build('gradcheck').validate().seed == 0

    def test_needs_exactly_one_data_source(self):
        with pytest.raises(ConfigError):
            build('train-edl', {'seed': 0}).validate()
        with pytest.raises(ConfigError):
            build('train-edl', {'seed': 0, 'synth': 'blobs', 'data_images': 'a', 'data_labels': 'b'}).validate()
        with pytest.raises(ConfigError):
            build('train-edl', {'seed': 0, 'data_images': 'a'}).validate()

    def test_rotate_sweep_needs_images(self):
        with pytest.raises(ConfigError):
            build('rotate-sweep', {'seed': 0, 'synth': 'blobs', 'ckpt': 'c.bin'}).validate()

    def test_head_modes_need_base(self):
        with pytest.raises(ConfigError, match='--base'):
            build('train-risk', {'seed': 0, 'synth': 'blobs', 'mode': 'edl-p', 'risk_matrix': 'zero'}).validate()
        build('train-risk', {'seed': 0, 'synth': 'blobs', 'mode': 'risk-edl', 'risk_matrix': 'zero'}).validate()

    def test_train_risk_needs_matrix(self):
        with pytest.raises(ConfigError):
            build('train-risk', {'seed': 0, 'synth': 'blobs', 'mode': 'risk-edl'}).validate()

    def test_cs_softmax_needs_matrix(self):
        with pytest.raises(ConfigError):
            build('pretrain', {'seed': 0, 'synth': 'blobs', 'mode': 'cs-softmax'}).validate()

    def test_mode_must_fit_command(self):
        with pytest.raises(ConfigError):
            build('pretrain', {'seed': 0, 'synth': 'blobs', 'mode': 'edl'}).validate()

    @pytest.mark.parametrize('flags', [{'epochs': -1}, {'lr': 0.0}, {'batch_size': 0}, {'kappa': -0.1},
                                       {'anneal_T': 0}, {'act': 'tanh'}, {'angle_step': 0}])
    def test_ranges(self, flags):
        with pytest.raises(ConfigError):
            build('train-edl', {'seed': 0, 'synth': 'blobs', **flags}).validate()

    @pytest.mark.parametrize('command, missing', [('finetune', 'base'), ('eval', 'ckpt'), ('fuse', 'ckpt-a')])
    def test_required_checkpoints(self, command, missing):
        with pytest.raises(ConfigError, match=f'--{missing}'):
            build(command, {'seed': 0, 'synth': 'blobs'}).validate()


def test_parse_classes():
    assert parse_classes('0, 2,5') == (0, 2, 5)
    assert parse_classes([1, 3]) == (1, 3)
    with pytest.raises(ConfigError):
        parse_classes('a,b')
