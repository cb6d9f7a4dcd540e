# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ellopt

import logging
from pathlib import Path
from unittest.mock import MagicMock, patch

import pytest
from pydantic import ValidationError

from coreason_ellopt.settings import Settings
from coreason_ellopt.utils.logger import logger, setup_logger


def test_logger_initialization() -> None:
    """Test that the logger is initialized correctly and creates the log directory."""
    from coreason_ellopt.settings import settings

    log_path = settings.LOG_FILE.parent

    assert log_path.exists()
    assert log_path.is_dir()

    assert isinstance(logger, logging.Logger)
    assert logger.name == "coreason_ellopt"
    assert len(logger.handlers) >= 1


def test_logger_is_idempotent() -> None:
    before = list(logger.handlers)
    setup_logger()
    assert logger.handlers == before


def test_logger_mkdir_logic() -> None:
    """
    Test that the logger setup logic attempts to create the directory if it doesn't exist.
    """
    saved = list(logger.handlers)
    try:
        with (
            patch("coreason_ellopt.utils.logger.settings") as mock_settings,
            patch("coreason_ellopt.utils.logger.RotatingFileHandler") as mock_handler,
        ):
            mock_path = MagicMock()
            mock_path.parent.exists.return_value = False
            mock_settings.LOG_FILE = mock_path
            mock_settings.LOG_LEVEL = "INFO"
            mock_settings.LOG_TO_FILE = True
            mock_settings.LOG_FORMAT = "%(message)s"
            mock_settings.LOG_CONSOLE_FORMAT = "%(levelname)s %(message)s"
            mock_settings.LOG_DATE_FORMAT = "%Y-%m-%d"
            mock_settings.LOG_MAX_BYTES = 1000
            mock_settings.LOG_BACKUP_COUNT = 1

            # Clear handlers to force setup
            logger.handlers = []

            setup_logger()

            mock_path.parent.mkdir.assert_called_once_with(parents=True, exist_ok=True)
            mock_handler.assert_called_once()
    finally:
        logger.handlers = saved


def test_logger_console_only_when_file_logging_disabled() -> None:
    saved = list(logger.handlers)
    try:
        with (
            patch("coreason_ellopt.utils.logger.settings") as mock_settings,
            patch("coreason_ellopt.utils.logger.RotatingFileHandler") as mock_handler,
        ):
            mock_settings.LOG_LEVEL = "WARNING"
            mock_settings.LOG_TO_FILE = False
            mock_settings.LOG_CONSOLE_FORMAT = "[ellopt] %(levelname)s %(message)s"
            logger.handlers = []

            setup_logger()

            mock_handler.assert_not_called()
            assert len(logger.handlers) == 1
            console = logger.handlers[0]
            assert isinstance(console, logging.StreamHandler)
            assert console.formatter is not None
            record = logging.LogRecord("coreason_ellopt", logging.WARNING, __file__, 1, "slow level", None, None)
            assert console.formatter.format(record) == "[ellopt] WARNING slow level"
            assert logger.level == logging.WARNING
    finally:
        logger.handlers = saved
        logger.setLevel(Settings().LOG_LEVEL)


def test_settings_defaults() -> None:
    defaults = Settings()
    assert defaults.RTOL == 1e-11
    assert defaults.QUAD_ORDER == 4
    assert defaults.RHO_EXPONENT == 4.0
    assert defaults.THREADS == 1
    assert defaults.LOG_TO_FILE is True
    assert defaults.LOG_FILE == Path("logs/ellopt.log")


def test_settings_environment_override(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.setenv("ELLOPT_THREADS", "4")
    monkeypatch.setenv("ELLOPT_RTOL", "1e-8")
    monkeypatch.setenv("ELLOPT_LOG_FILE", str(tmp_path / "run.log"))
    overridden = Settings()
    assert overridden.THREADS == 4
    assert overridden.RTOL == 1e-8
    assert overridden.LOG_FILE == tmp_path / "run.log"


def test_settings_reject_unknown_quadrature(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("ELLOPT_QUAD_ORDER", "3")
    with pytest.raises(ValidationError):
        Settings()
