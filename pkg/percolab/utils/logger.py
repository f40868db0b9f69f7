"""Logging utilities for the laboratory.

This module provides a configured structlog logger shared across the package.
"""

import logging
import sys

import structlog
from structlog.stdlib import BoundLogger

from percolab.config import settings

_configured = False


def configure_logger(level: str | None = None, json: bool | None = None) -> None:
    """Configure structlog with JSON formatting and other processors.

    Processors, in order:
    - Context variables merging
    - Log level addition
    - Stack info rendering
    - Exception info
    - ISO timestamp format
    - JSON (or console) rendering

    Logs go to stderr; stdout is reserved for result streams.

    Args:
        level: Log level name, defaults to settings.LOG_LEVEL
        json: Render JSON lines, defaults to settings.LOG_JSON
    """
    global _configured

    level_name = (level or settings.LOG_LEVEL).upper()
    use_json = settings.LOG_JSON if json is None else json
    renderer = (
        structlog.processors.JSONRenderer()
        if use_json
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.dev.set_exc_info,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level_name)
        ),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
    _configured = True


def get_logger(name: str) -> BoundLogger:
    """Get a configured structlog logger.

    Args:
        name: The name of the logger, typically __name__

    Returns:
        A configured structlog BoundLogger instance
    """
    if not _configured:
        configure_logger()
    return structlog.get_logger(name)
