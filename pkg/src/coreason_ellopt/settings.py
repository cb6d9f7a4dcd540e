# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ellopt

from pathlib import Path
from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Centralized configuration for the application.
    Every field can be overridden through an ``ELLOPT_``-prefixed environment variable.
    """

    # Logging
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "INFO"
    LOG_TO_FILE: bool = True
    LOG_FILE: Path = Path("logs/ellopt.log")
    LOG_FORMAT: str = "%(asctime)s | %(levelname)-8s | %(name)s:%(funcName)s:%(lineno)s - %(message)s"
    LOG_CONSOLE_FORMAT: str = "[ellopt] %(levelname)s %(message)s"
    LOG_DATE_FORMAT: str = "%Y-%m-%d %H:%M:%S"
    LOG_MAX_BYTES: int = 10 * 1024 * 1024  # 10 MB
    LOG_BACKUP_COUNT: int = 5

    # Numerics
    THREADS: int = 1
    RTOL: float = 1e-11
    QUAD_ORDER: Literal[1, 2, 4] = 4
    RHO_EXPONENT: float = 4.0
    MAX_ITERATIONS_CAP: int = 20000
    SEED: int = 0

    model_config = SettingsConfigDict(env_prefix="ELLOPT_", case_sensitive=True)


settings = Settings()
