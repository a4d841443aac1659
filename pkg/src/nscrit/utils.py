"""Utilities: logging configuration, error handling, and common operations."""

import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

from loguru import logger


def init_logging(output_dir: Optional[Path], verbose: bool = False) -> Optional[Path]:
    """Configure loguru for nscrit with ISO 8601 timestamps.

    Sets up dual output: file (full detail) and stderr (colorized, concise). Without an
    output directory only the stderr sink is installed. Returns the path to the log file.
    """
    logger.remove()
    level = "DEBUG" if verbose else "INFO"

    log_file: Optional[Path] = None
    if output_dir is not None:
        output_dir = ensure_directory(output_dir)
        log_file = output_dir / "log.txt"
        logger.add(
            log_file,
            level="DEBUG",
            format="{time:YYYY-MM-DDTHH:mm:ss.SSS!UTC} | {level: <8} | {name}:{function}:{line} | {message}",
            rotation="10 MB",
            retention="7 days",
            encoding="utf-8",
        )

    logger.add(
        sys.stderr,
        level=level,
        format="<level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan> | {message}",
        colorize=True,
    )

    logger.info("=" * 80)
    logger.info(f"nscrit: logging started ({datetime.now().isoformat()})")
    logger.info(f"Level: {level} | File: {log_file if log_file else 'stderr only'}")
    logger.info("=" * 80)

    return log_file


class NSCritError(Exception):
    pass


class ConfigError(NSCritError):
    pass


class GridError(NSCritError):
    pass


class FieldError(NSCritError):
    pass


class SpectralError(NSCritError):
    pass


class QuadratureError(NSCritError):
    pass


class NormError(NSCritError):
    pass


class SolverError(NSCritError):
    pass


def ensure_directory(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
        return path
    except OSError as e:
        raise NSCritError(f"Failed to create directory {path}: {e}") from e
