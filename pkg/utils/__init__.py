"""
Utility modules: run configuration, error hierarchy and logging setup.
"""

from .config import RunConfig, COMMANDS, load_config_file, parse_classes
from .errors import (
    EvidentialError,
    ConfigError,
    DataError,
    IdxFormatError,
    RiskMatrixError,
    CheckpointError,
    NumericalError,
    ShapeError,
    DirichletError,
    MetricsError,
    ContractError,
)
from .logging_config import setup_logging

__all__ = [
    'RunConfig',
    'COMMANDS',
    'load_config_file',
    'parse_classes',
    'EvidentialError',
    'ConfigError',
    'DataError',
    'IdxFormatError',
    'RiskMatrixError',
    'CheckpointError',
    'NumericalError',
    'ShapeError',
    'DirichletError',
    'MetricsError',
    'ContractError',
    'setup_logging',
]
