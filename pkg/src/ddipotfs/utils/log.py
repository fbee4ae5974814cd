"""Package logger with a rich console handler."""

from __future__ import annotations

import logging
from pathlib import Path

from rich.logging import RichHandler

_FORMAT = "%(name)s: %(levelname)s: %(message)s"


def _setup_root_logger() -> None:
    root = logging.getLogger("ddipotfs")
    if any(isinstance(handler, RichHandler) for handler in root.handlers):
        return
    root.setLevel(logging.DEBUG)
    handler = RichHandler(show_path=False, show_time=False, show_level=False, markup=False)
    handler.setLevel(logging.INFO)
    handler.setFormatter(logging.Formatter(_FORMAT))
    root.addHandler(handler)


def add_file_handler(path: Path | str, level: int = logging.DEBUG) -> logging.Handler:
    """Mirror the package log into `path`; returns the handler so callers can detach it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter("%(asctime)s - " + _FORMAT))
    logger.addHandler(handler)
    return handler


def remove_handler(handler: logging.Handler) -> None:
    logger.removeHandler(handler)
    handler.close()


_setup_root_logger()
logger = logging.getLogger("ddipotfs")
