# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ellopt

"""
Package logger. Solver progress goes to stderr in a short format so that result
tables on stdout stay machine-readable; the rotating run log keeps full records.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler

from coreason_ellopt.settings import settings

logger = logging.getLogger("coreason_ellopt")


def setup_logger() -> None:
    """Configures the package logger. Idempotent."""
    logger.setLevel(settings.LOG_LEVEL)

    if logger.handlers:
        return

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(logging.Formatter(fmt=settings.LOG_CONSOLE_FORMAT))
    logger.addHandler(console_handler)

    if not settings.LOG_TO_FILE:
        return

    log_path = settings.LOG_FILE
    if not log_path.parent.exists():
        log_path.parent.mkdir(parents=True, exist_ok=True)

    file_handler = RotatingFileHandler(
        log_path, maxBytes=settings.LOG_MAX_BYTES, backupCount=settings.LOG_BACKUP_COUNT, encoding="utf-8"
    )
    file_handler.setFormatter(logging.Formatter(fmt=settings.LOG_FORMAT, datefmt=settings.LOG_DATE_FORMAT))
    logger.addHandler(file_handler)


setup_logger()

__all__ = ["logger", "setup_logger"]
