"""
Experiments Module

CLI commands tying data, models and metrics together.
"""

from .commands import (
    CommandResult,
    COMMAND_HANDLERS,
    run_command,
    fuse_models,
    cmd_pretrain,
    cmd_train_edl,
    cmd_finetune,
    cmd_train_risk,
    cmd_fuse,
    cmd_rotate_sweep,
    cmd_eval,
    cmd_gradcheck,
)
from .inputs import load_dataset, load_ood, load_risk, write_train_log

__all__ = [
    'CommandResult',
    'COMMAND_HANDLERS',
    'run_command',
    'fuse_models',
    'cmd_pretrain',
    'cmd_train_edl',
    'cmd_finetune',
    'cmd_train_risk',
    'cmd_fuse',
    'cmd_rotate_sweep',
    'cmd_eval',
    'cmd_gradcheck',
    'load_dataset',
    'load_ood',
    'load_risk',
    'write_train_log',
]
