"""
Logging configuration for the leafaug pipeline.
"""
import logging
import sys
from typing import Union

ROOT_LOGGER_NAME = "leafaug"


def setup_logger(level: Union[int, str] = logging.INFO) -> logging.Logger:
    """
    Set up and configure the pipeline logger.

    Args:
        level: Logging level, as an int or a level name such as "DEBUG"

    Returns:
        Configured root logger for the pipeline
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO

    logger = logging.getLogger(ROOT_LOGGER_NAME)
    logger.setLevel(level)

    # Avoid adding multiple handlers if logger already exists
    if not logger.handlers:
        # stdout carries machine-readable output, so logs go to stderr
        handler = logging.StreamHandler(sys.stderr)
        handler.setLevel(logging.NOTSET)
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    return logger


def get_logger(name: str) -> logging.Logger:
    """Return a child logger of the pipeline logger."""
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")
