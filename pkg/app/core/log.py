# app/core/log.py

import os
import sys

from dotenv import load_dotenv
from loguru import logger

DEFAULT_LEVEL = "INFO"


def configure_logging(quiet: bool = False) -> str:
    """
    Replaces loguru's default sink with a single stderr sink.

    The level comes from PATCHY_LOG_LEVEL (read through .env when present);
    --quiet forces WARNING.
    """
    load_dotenv()
    level = "WARNING" if quiet else os.getenv("PATCHY_LOG_LEVEL", DEFAULT_LEVEL).upper()
    logger.remove()
    logger.add(sys.stderr, level=level, format="<level>{level: <8}</level> | {name}:{function} - {message}")
    return level
