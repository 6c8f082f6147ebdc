"""
Logging configuration for the lab.

This module sets up logging with:
- Colored console output
- Optional plain-text log file under the output directory
- Level taken from settings (VACUUM_LOG_LEVEL)
- Quieted third-party loggers
"""

import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

from config import settings


class LogColors:
    """ANSI color codes for terminal output."""
    RESET = "\033[0m"

    DEBUG = "\033[36m"      # Cyan
    INFO = "\033[32m"       # Green
    WARNING = "\033[33m"    # Yellow
    ERROR = "\033[31m"      # Red
    CRITICAL = "\033[35m"   # Magenta

    TIMESTAMP = "\033[90m"  # Gray
    MODULE = "\033[94m"     # Light Blue


def _timestamp(record: logging.LogRecord) -> str:
    return datetime.fromtimestamp(record.created).strftime("%Y-%m-%d %H:%M:%S")


class ColoredFormatter(logging.Formatter):
    """Console formatter: timestamp | level | module | message, colored by level."""

    LEVEL_COLORS = {
        logging.DEBUG: LogColors.DEBUG,
        logging.INFO: LogColors.INFO,
        logging.WARNING: LogColors.WARNING,
        logging.ERROR: LogColors.ERROR,
        logging.CRITICAL: LogColors.CRITICAL,
    }

    def format(self, record: logging.LogRecord) -> str:
        level_color = self.LEVEL_COLORS.get(record.levelno, LogColors.RESET)
        message = record.getMessage()
        if record.exc_info:
            message += "\n" + self.formatException(record.exc_info)
        return (
            f"{LogColors.TIMESTAMP}{_timestamp(record)}{LogColors.RESET} | "
            f"{level_color}{record.levelname:<8}{LogColors.RESET} | "
            f"{LogColors.MODULE}{record.name:<25}{LogColors.RESET} | {message}"
        )


class PlainFormatter(logging.Formatter):
    """Same layout as ColoredFormatter without escape codes, for files."""

    def format(self, record: logging.LogRecord) -> str:
        message = record.getMessage()
        if record.exc_info:
            message += "\n" + self.formatException(record.exc_info)
        return f"{_timestamp(record)} | {record.levelname:<8} | {record.name:<25} | {message}"


def setup_logging(
    log_file: Optional[str] = None,
    log_to_file: bool = False,
) -> logging.Logger:
    """
    Configure the root logger.

    Args:
        log_file: Optional path to a log file
        log_to_file: Also log to a file (default name under <output_dir>/logs)

    Returns:
        logging.Logger: Configured root logger
    """
    log_level = getattr(logging, settings.log_level.upper(), logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.handlers.clear()

    # === Console Handler ===
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(ColoredFormatter())
    root_logger.addHandler(console_handler)

    # === File Handler (optional) ===
    if log_to_file:
        if not log_file:
            logs_dir = Path(settings.output_dir) / "logs"
            logs_dir.mkdir(parents=True, exist_ok=True)
            log_file = logs_dir / f"vacuum_lab_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"

        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(log_level)
        file_handler.setFormatter(PlainFormatter())
        root_logger.addHandler(file_handler)

    # === Third-party loggers ===
    for noisy in ("matplotlib", "numba", "urllib3"):
        logging.getLogger(noisy).setLevel(logging.WARNING)

    root_logger.debug("Logging system initialized")
    root_logger.debug(f"Log level: {settings.log_level}")
    if log_to_file:
        root_logger.info(f"Logging to file: {log_file}")

    return root_logger
