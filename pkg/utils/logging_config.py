"""
Logging Setup

Configures the root logger for CLI runs. Console output goes through rich,
and an optional log file receives the same records in plain text.
"""

import logging
from typing import Optional

from rich.logging import RichHandler

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(verbose: bool = False, debug: bool = False, log_file: Optional[str] = None) -> int:
    """
    Configure logging for a CLI run.

    Args:
        verbose: Show per-epoch INFO messages
        debug: Show DEBUG messages (data loading, checkpoint I/O)
        log_file: Also write records to this file

    Returns:
        int: The effective log level
    """
    if debug:
        level = logging.DEBUG
    elif verbose:
        level = logging.INFO
    else:
        level = logging.WARNING

    handlers = [RichHandler(rich_tracebacks=True, show_path=False)]
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handlers.append(file_handler)

    logging.basicConfig(level=level, format='%(message)s', handlers=handlers, force=True)
    return level
