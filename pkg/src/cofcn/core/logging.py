"""structlog configuration shared by the library and the command line."""

import logging
import sys

from typing import Optional

import structlog

from structlog.stdlib import BoundLogger


__all__ = ["configure_logging", "get_logger"]


def configure_logging(level: str = "INFO", json_logs: bool = False):
    """Configures structlog to render through the stdlib logging module.

    Log records are written to standard error so that standard output stays
    free for command results.

    Args:
        level: The minimum log level name
        json_logs: Render JSON lines instead of the human readable console format
    """
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, level.upper()),
        force=True,
    )

    renderer = (
        structlog.processors.JSONRenderer()
        if json_logs
        else structlog.dev.ConsoleRenderer(colors=False)
    )

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def get_logger(name: Optional[str] = None) -> BoundLogger:
    return structlog.get_logger(name or "cofcn")
