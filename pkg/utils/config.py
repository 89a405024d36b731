"""
Run Configuration

One RunConfig per CLI invocation. Values are layered, lowest precedence first:

1. dataclass defaults
2. environment (.env is loaded with python-dotenv): EDL_OUTPUT_DIR, EDL_DATA_DIR, EDL_BATCH_SIZE
3. --config file (JSON, or YAML for .yml / .yaml)
4. flags given explicitly on the command line

validate() checks the fields each command needs. The seed is always
required except for gradcheck, which has a fixed default.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml
from dotenv import load_dotenv

from utils.errors import ConfigError

logger = logging.getLogger(__name__)

COMMANDS = ('pretrain', 'train-edl', 'finetune', 'train-risk', 'fuse', 'rotate-sweep', 'eval', 'gradcheck')
PRETRAIN_MODES = ('softmax', 'cs-softmax')
RISK_MODES = ('risk-edl', 'edl-p', 'edl-pg')
ALL_MODES = PRETRAIN_MODES + ('edl',) + RISK_MODES
ACTIVATIONS = ('relu', 'softplus', 'exp', 'clamped-exp')
HEAD_INITS = ('zero', 'gaussian')

# Per-command defaults applied when neither file nor flag sets the field
COMMAND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    'pretrain': {'mode': 'softmax', 'epochs': 20, 'lr': 1e-3},
    'train-edl': {'mode': 'edl', 'epochs': 20, 'lr': 1e-3, 'act': 'softplus'},
    'finetune': {'mode': 'edl', 'epochs': 10, 'lr': 1e-5, 'act': 'clamped-exp'},
    'train-risk': {'mode': 'edl-p', 'lr': 1e-3, 'act': 'softplus'},
}
# train-risk: head phases (edl-p, edl-pg) run longer than joint riskEDL training
RISK_EPOCHS = {'risk-edl': 20, 'edl-p': 50, 'edl-pg': 50}

ENVIRONMENT = {'EDL_OUTPUT_DIR': ('out', str), 'EDL_DATA_DIR': ('data_dir', str), 'EDL_BATCH_SIZE': ('batch_size', int)}


@dataclass
class RunConfig:
    """Every setting a CLI command can read."""
    command: str = ''
    # data
    data_images: Optional[str] = None
    data_labels: Optional[str] = None
    synth: Optional[str] = None
    data_dir: Optional[str] = None
    limit: Optional[int] = None
    classes: Optional[Tuple[int, ...]] = None
    ood: Optional[str] = None
    # model and training
    backbone: str = 'mlp:128'
    mode: Optional[str] = None
    epochs: Optional[int] = None
    lr: Optional[float] = None
    act: Optional[str] = None
    kappa: float = 0.01
    anneal_T: int = 10
    risk_matrix: Optional[str] = None
    cost_weight: float = 0.1
    head_init: str = 'zero'
    batch_size: int = 64
    seed: Optional[int] = None
    # checkpoints and outputs
    base: Optional[str] = None
    ckpt: Optional[str] = None
    ckpt_a: Optional[str] = None
    ckpt_b: Optional[str] = None
    image_index: Optional[int] = None
    digit: Optional[int] = None
    angle_step: int = 10
    out: str = './output'
    # logging
    verbose: bool = False
    debug: bool = False
    log_file: Optional[str] = None
    sources: Dict[str, str] = field(default_factory=dict, repr=False, compare=False)

    # ------------------------------------------------------------------ #
    # Loading
    # ------------------------------------------------------------------ #
    @classmethod
    def field_names(cls) -> Tuple[str, ...]:
        return tuple(item.name for item in fields(cls) if item.name != 'sources')

    def _set(self, values: Mapping[str, Any], source: str) -> None:
        known = self.field_names()
        for key, value in values.items():
            name = key.replace('-', '_')
            if name == 'anneal_t':
                name = 'anneal_T'
            if name not in known:
                raise ConfigError(f"unknown configuration key '{key}' in {source}")
            if name == 'classes' and value is not None:
                value = parse_classes(value)
            setattr(self, name, value)
            self.sources[name] = source

    @classmethod
    def from_sources(cls, command: str, flags: Optional[Mapping[str, Any]] = None,
                     config_path: Optional[str] = None, environ: Optional[Mapping[str, str]] = None,
                     use_dotenv: bool = True) -> 'RunConfig':
        """
        Build the configuration for a command.

        Args:
            command: CLI command name
            flags: Values from argparse; None means "not given on the command line"
            config_path: Optional JSON/YAML file
            environ: Environment mapping (os.environ by default)
            use_dotenv: Load .env before reading the environment

        Raises:
            ConfigError: unknown command or key, unreadable config file, bad environment value
        """
        if command not in COMMANDS:
            raise ConfigError(f"unknown command '{command}' (choose from {', '.join(COMMANDS)})")
        if use_dotenv and environ is None:
            load_dotenv()
        environ = os.environ if environ is None else environ

        config = cls(command=command)
        for variable, (name, kind) in ENVIRONMENT.items():
            raw = environ.get(variable)
            if raw:
                try:
                    config._set({name: kind(raw)}, f'${variable}')
                except ValueError:
                    raise ConfigError(f"{variable}={raw!r} is not a valid {kind.__name__}") from None
        if config_path:
            config._set(load_config_file(config_path), config_path)
        if flags:
            config._set({k: v for k, v in flags.items() if v is not None and k in cls.field_names()}, 'flag')
        for name, value in COMMAND_DEFAULTS.get(command, {}).items():
            if getattr(config, name) is None:
                setattr(config, name, value)
        if command == 'train-risk' and config.epochs is None:
            config.epochs = RISK_EPOCHS.get(config.mode, 50)
        logger.debug(f"Configuration for {command}: {config.to_dict()}")
        return config

    # ------------------------------------------------------------------ #
    # Validation
    # ------------------------------------------------------------------ #
    def validate(self) -> 'RunConfig':
        """Raise ConfigError when a field the command needs is missing or malformed."""
        command = self.command
        if command not in COMMANDS:
            raise ConfigError(f"unknown command '{command}'")
        if command == 'gradcheck':
            if self.seed is None:
                self.seed = 0
            return self
        if self.seed is None:
            raise ConfigError(f"{command}: --seed is required")

        has_idx = self.data_images is not None or self.data_labels is not None
        if has_idx and self.synth is not None:
            raise ConfigError(f"{command}: give either --data-images/--data-labels or --synth, not both")
        if has_idx and (self.data_images is None or self.data_labels is None):
            raise ConfigError(f"{command}: --data-images and --data-labels go together")
        if not has_idx and self.synth is None:
            raise ConfigError(f"{command}: a dataset is required (--data-images/--data-labels or --synth)")
        if command == 'rotate-sweep' and not has_idx:
            raise ConfigError("rotate-sweep needs an image dataset (--data-images/--data-labels)")

        if self.epochs is not None and self.epochs < 0:
            raise ConfigError(f"--epochs must be >= 0, got {self.epochs}")
        if self.lr is not None and self.lr <= 0:
            raise ConfigError(f"--lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"--batch-size must be positive, got {self.batch_size}")
        if self.kappa < 0:
            raise ConfigError(f"--kappa must be non-negative, got {self.kappa}")
        if self.anneal_T < 1:
            raise ConfigError(f"--anneal-T must be positive, got {self.anneal_T}")
        if self.act is not None and self.act not in ACTIVATIONS:
            raise ConfigError(f"--act must be one of {', '.join(ACTIVATIONS)}")
        if self.head_init not in HEAD_INITS:
            raise ConfigError(f"--head-init must be one of {', '.join(HEAD_INITS)}")
        if self.angle_step < 1:
            raise ConfigError(f"--angle-step must be positive, got {self.angle_step}")

        if command == 'pretrain':
            self._require_mode(PRETRAIN_MODES)
            if self.mode == 'cs-softmax' and self.risk_matrix is None:
                raise ConfigError("pretrain --mode cs-softmax needs --risk-matrix")
        elif command in ('train-edl', 'finetune'):
            self._require_mode(('edl',))
        elif command == 'train-risk':
            self._require_mode(RISK_MODES)
            if self.risk_matrix is None:
                raise ConfigError("train-risk needs --risk-matrix")
            if self.mode in ('edl-p', 'edl-pg') and self.base is None:
                raise ConfigError(f"train-risk --mode {self.mode} needs --base <trained EDL checkpoint>")

        required = {'finetune': ('base',), 'eval': ('ckpt',), 'rotate-sweep': ('ckpt',), 'fuse': ('ckpt_a', 'ckpt_b')}
        for name in required.get(command, ()):
            if getattr(self, name) is None:
                raise ConfigError(f"{command} needs --{name.replace('_', '-')}")
        return self

    def _require_mode(self, allowed: Tuple[str, ...]) -> None:
        if self.mode not in allowed:
            raise ConfigError(f"{self.command}: --mode must be one of {', '.join(allowed)}, got {self.mode}")

    # ------------------------------------------------------------------ #
    # Helpers
    # ------------------------------------------------------------------ #
    def resolve_path(self, path: Optional[str]) -> Optional[Path]:
        """Relative data paths are taken from EDL_DATA_DIR when it is set."""
        if path is None:
            return None
        candidate = Path(path)
        if not candidate.is_absolute() and self.data_dir:
            candidate = Path(self.data_dir) / candidate
        return candidate

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values.pop('sources')
        if values['classes'] is not None:
            values['classes'] = list(values['classes'])
        return values


def parse_classes(value) -> Tuple[int, ...]:
    """'0,1,2' or [0, 1, 2] -> (0, 1, 2)."""
    try:
        if isinstance(value, str):
            return tuple(int(part) for part in value.split(',') if part.strip())
        return tuple(int(part) for part in value)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot parse class list {value!r}") from None


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a flat JSON or YAML mapping of configuration keys."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        values = yaml.safe_load(text) if path.suffix in ('.yml', '.yaml') else json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid config file {path}: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a mapping of keys to values")
    return values
