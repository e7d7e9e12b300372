"""Configuration management for the samplers and the CLI."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import DataError, UsageError

THREADS_ENV = "LOWRANK_THREADS"
DEFAULT_THREADS = 4
DENSE_CELL_LIMIT = 10_000_000
SEED_MAX = 2**64 - 1


def resolve_threads(flag: Optional[int] = None) -> int:
    """``--threads`` beats ``LOWRANK_THREADS`` beats the default."""
    if flag is not None:
        if flag < 1:
            raise UsageError("threads must be >= 1")
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}")
        if value < 1:
            raise UsageError(f"{THREADS_ENV} must be >= 1")
        return value
    return DEFAULT_THREADS


def default_lambda(n: int, noise_sd: float) -> float:
    return n / (2.0 * noise_sd**2)


class _JsonConfig:
    def to_dict(self) -> dict[str, Any]:
        return asdict(self)  # type: ignore[call-overload]

    @classmethod
    def from_dict(cls, data: dict[str, Any]):
        """Unknown keys are ignored, so one dict can feed both config types."""
        known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class SamplerConfig(_JsonConfig):
    """Settings of one Gibbs chain.

    ``lambda_`` is the inverse temperature of the tempered posterior; when it
    is left unset it defaults to ``n / (2 * noise_sd**2)``, which makes the
    likelihood weight ``2 * lambda / n`` equal to ``1 / noise_sd**2``.
    """

    K: int = 5
    iterations: int = 1000
    burn_in: int = 100
    thinning: int = 10
    seed: int = 0
    noise_sd: float = 1.0
    lambda_: Optional[float] = None
    chain: int = 0
    threads: Optional[int] = None
    dense_cell_limit: int = DENSE_CELL_LIMIT
    log_every: int = 100
    max_lag: int = 20

    def __post_init__(self):
        if self.K < 1:
            raise UsageError("K must be a positive integer")
        if self.iterations < 1:
            raise UsageError("iterations must be a positive integer")
        if not 0 <= self.burn_in < self.iterations:
            raise UsageError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise UsageError("thinning must be a positive integer")
        if not 0 <= int(self.seed) <= SEED_MAX:
            raise UsageError("seed must be a 64-bit unsigned integer")
        if not self.noise_sd > 0:
            raise UsageError("noise_sd must be positive")
        if self.lambda_ is not None and not self.lambda_ > 0:
            raise UsageError("lambda must be positive")

    @property
    def retained_count(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning

    def is_retained(self, iteration: int) -> bool:
        """``iteration`` is 1-based; keeps every thinning-th post-burn-in sweep."""
        after = iteration - self.burn_in
        return after > 0 and after % self.thinning == 0

    def resolve_lambda(self, n: int) -> float:
        if self.lambda_ is not None:
            return float(self.lambda_)
        return default_lambda(n, self.noise_sd)

    def likelihood_weight(self, n: int) -> float:
        """The factor ``2 * lambda / n`` in front of every data term."""
        if n == 0:
            return 0.0
        return 2.0 * self.resolve_lambda(n) / n

    def worker_count(self) -> int:
        return resolve_threads(self.threads)


@dataclass
class VBConfig(_JsonConfig):
    K: int = 5
    tol: float = 1e-4
    max_iter: int = 100
    seed: int = 0
    noise_sd: float = 1.0
    lambda_: Optional[float] = None
    init_sd2: float = 0.1
    threads: Optional[int] = None

    def __post_init__(self):
        if self.K < 1:
            raise UsageError("K must be a positive integer")
        if self.max_iter < 1:
            raise UsageError("max_iter must be a positive integer")
        if self.tol < 0:
            raise UsageError("tol must be nonnegative")
        if not self.noise_sd > 0:
            raise UsageError("noise_sd must be positive")
        if self.lambda_ is not None and not self.lambda_ > 0:
            raise UsageError("lambda must be positive")
        if not self.init_sd2 > 0:
            raise UsageError("init_sd2 must be positive")

    def resolve_lambda(self, n: int) -> float:
        if self.lambda_ is not None:
            return float(self.lambda_)
        return default_lambda(n, self.noise_sd)

    def likelihood_weight(self, n: int) -> float:
        if n == 0:
            return 0.0
        return 2.0 * self.resolve_lambda(n) / n

    def worker_count(self) -> int:
        return resolve_threads(self.threads)


def load_config_values(path: Optional[Path], default_K: int = 5) -> dict[str, Any]:
    """SamplerConfig and VBConfig settings merged into one dict, file values over defaults."""
    values = {**SamplerConfig(K=default_K).to_dict(), **VBConfig(K=default_K).to_dict()}
    if path is None:
        return values
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except ValueError as e:
        raise DataError(f"corrupted config {path}: {e}")
    if not isinstance(data, dict):
        raise DataError(f"config {path} must hold a JSON object")
    values.update(data)
    return values


class ConfigEncoder(json.JSONEncoder):
    def default(self, o: Any) -> Any:
        if isinstance(o, Path):
            return str(o)
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)


__all__ = [
    "SamplerConfig",
    "VBConfig",
    "ConfigEncoder",
    "resolve_threads",
    "load_config_values",
    "default_lambda",
    "THREADS_ENV",
    "DENSE_CELL_LIMIT",
]
