"""Logging utilities (rich-backed wrapper)."""

from __future__ import annotations

import logging
from typing import Optional, Union

from rich.console import Console
from rich.logging import RichHandler

ROOT_NAME = "lowrank_mc"

_LOGGER: Optional[logging.Logger] = None


def get_logger(name: Optional[str] = None) -> logging.Logger:
    global _LOGGER
    if _LOGGER is None:
        logger = logging.getLogger(ROOT_NAME)
        handler = RichHandler(
            console=Console(stderr=True),
            show_path=False,
            log_time_format="[%X]",
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
        logger.propagate = False
        _LOGGER = logger
    if name:
        return _LOGGER.getChild(name)
    return _LOGGER


def set_level(level: Union[int, str]) -> None:
    get_logger().setLevel(level)


__all__ = ["get_logger", "set_level", "ROOT_NAME"]
