"""
Logging setup shared by the CLI and the Monte Carlo workers.
"""

import logging
import os
from typing import Optional

from pythonjsonlogger import jsonlogger

LOG_LEVEL_ENV = "HETRRR_LOG_LEVEL"
DEFAULT_LOG_LEVEL = "WARNING"
JSON_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"
PLAIN_FORMAT = "%(levelname)s %(name)s: %(message)s"

_LOGGER_NAMES = ("analysis", "cli")


def resolve_level(level: Optional[str] = None) -> str:
    """Pick the log level: explicit value, then the environment, then the default."""
    chosen = level or os.environ.get(LOG_LEVEL_ENV) or DEFAULT_LOG_LEVEL
    chosen = chosen.upper()
    if not isinstance(logging.getLevelName(chosen), int):
        raise ValueError(f"Unknown log level: {chosen}")
    return chosen


def configure_logging(level: Optional[str] = None, json_format: bool = True) -> None:
    """
    Install one stderr handler on the package loggers.

    Args:
        level: Level name; falls back to HETRRR_LOG_LEVEL, then WARNING
        json_format: Emit one JSON object per record when True
    """
    handler = logging.StreamHandler()
    if json_format:
        handler.setFormatter(jsonlogger.JsonFormatter(JSON_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(PLAIN_FORMAT))

    resolved = resolve_level(level)
    for name in _LOGGER_NAMES:
        logger = logging.getLogger(name)
        logger.handlers = [handler]
        logger.setLevel(resolved)
        logger.propagate = False
