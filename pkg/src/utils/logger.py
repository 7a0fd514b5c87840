"""
Logging configuration for TextSR

Every record carries the config hash of the run that produced it, so lines
from the shared log file can be matched to checkpoints and reports.
"""
import logging
import sys
from pathlib import Path
from logging.handlers import RotatingFileHandler
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - [%(config_hash)s] - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
RUN_LOG = 'run.log'


class RunContextFilter(logging.Filter):
    """Stamps records with the active config hash ('-' before one is bound)"""

    def __init__(self, config_hash: str = '-'):
        super().__init__()
        self.config_hash = config_hash or '-'

    def filter(self, record: logging.LogRecord) -> bool:
        record.config_hash = self.config_hash
        return True


def _context(logger: logging.Logger) -> RunContextFilter:
    for f in logger.filters:
        if isinstance(f, RunContextFilter):
            return f
    context = RunContextFilter()
    logger.addFilter(context)
    return context


def _handler(handler: logging.Handler, context: RunContextFilter) -> logging.Handler:
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    handler.addFilter(context)
    return handler


def setup_logger(
    name: str = "textsr",
    log_file: Optional[str] = None,
    level: str = "INFO",
    log_to_console: bool = True,
    config_hash: str = '-'
) -> logging.Logger:
    """
    Set up logger with file and console handlers

    Args:
        name: Logger name
        log_file: Path to log file
        level: Logging level (DEBUG, INFO, WARNING, ERROR)
        log_to_console: Whether to log to console
        config_hash: Run identifier written into every line

    Returns:
        Configured logger
    """
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, level.upper()))

    # Remove existing handlers
    logger.handlers = []
    context = _context(logger)
    context.config_hash = config_hash or '-'

    if log_to_console:
        logger.addHandler(_handler(logging.StreamHandler(sys.stdout), context))

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10*1024*1024,  # 10MB
            backupCount=5
        )
        logger.addHandler(_handler(file_handler, context))

    return logger


def attach_run_log(run_dir, config_hash: Optional[str] = None, name: str = "textsr") -> logging.Handler:
    """
    Mirror the logger into <run_dir>/run.log for the length of one run

    Rebinds the config hash when one is given. The returned handler is
    passed to detach_run_log when the run ends.
    """
    logger = logging.getLogger(name)
    context = _context(logger)
    if config_hash:
        context.config_hash = config_hash
    path = Path(run_dir) / RUN_LOG
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = _handler(logging.FileHandler(path), context)
    logger.addHandler(handler)
    return handler


def detach_run_log(handler: logging.Handler, name: str = "textsr"):
    logging.getLogger(name).removeHandler(handler)
    handler.close()


def get_logger(name: str = "textsr") -> logging.Logger:
    """
    Get existing logger or create default one

    Args:
        name: Logger name

    Returns:
        Logger instance
    """
    return logging.getLogger(name)
