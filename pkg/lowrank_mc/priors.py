"""Priors on the column scales gamma and their conditional posteriors.

Columns of M and N are N(0, gamma_h I) given gamma. Four families are
supported; each maps the column energies S_h = |M_h|^2 + |N_h|^2 to a
per-column conditional law that the Gibbs sampler draws from.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, ClassVar, Union

import numpy as np
from scipy.special import expit

from .errors import UsageError
from .random_streams import (
    RngStream,
    sample_bernoulli,
    sample_inverse_gamma,
    sample_inverse_gaussian,
)

# Smallest column energy used to form the inverse-Gaussian mean.
MIN_COLUMN_ENERGY = 1e-12


# --- Conditional laws --------------------------------------------------------


@dataclass
class DiracConditional:
    point: np.ndarray

    def sample(self, rng: RngStream) -> np.ndarray:
        return self.point.copy()

    def mean(self) -> np.ndarray:
        return self.point.copy()


@dataclass
class InvGammaConditional:
    shape: np.ndarray
    rate: np.ndarray

    def sample(self, rng: RngStream) -> np.ndarray:
        return sample_inverse_gamma(self.shape, self.rate, rng)

    def mean(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.shape > 1, self.rate / (self.shape - 1), np.inf)


@dataclass
class InvGaussianConditional:
    mu: np.ndarray
    shape: np.ndarray

    def sample(self, rng: RngStream) -> np.ndarray:
        return sample_inverse_gaussian(self.mu, self.shape, rng)

    def mean(self) -> np.ndarray:
        return self.mu.copy()


@dataclass
class TwoPointConditional:
    prob_high: np.ndarray
    low: float
    high: float

    def sample(self, rng: RngStream) -> np.ndarray:
        pick = sample_bernoulli(self.prob_high, rng)
        return np.where(pick == 1, self.high, self.low).astype(np.float64)

    def mean(self) -> np.ndarray:
        return self.low + self.prob_high * (self.high - self.low)


GammaConditional = Union[
    DiracConditional, InvGammaConditional, InvGaussianConditional, TwoPointConditional
]


# --- Priors ------------------------------------------------------------------


class _Prior:
    kind: ClassVar[str]

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **asdict(self)}  # type: ignore[call-overload]

    def describe(self) -> str:
        params = ", ".join(f"{k}={v:g}" for k, v in asdict(self).items())  # type: ignore[call-overload]
        return f"{self.kind}({params})"


@dataclass(frozen=True)
class FixedPrior(_Prior):
    kind: ClassVar[str] = "fixed"
    gamma0: float = 1.0

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise UsageError("gamma0 must be positive")

    def initial_gamma(self, m1: int, m2: int, K: int) -> np.ndarray:
        return np.full(K, float(self.gamma0))

    def conditional(self, S: np.ndarray, m1: int, m2: int) -> DiracConditional:
        return DiracConditional(np.full(np.shape(S), float(self.gamma0)))


@dataclass(frozen=True)
class InverseGammaPrior(_Prior):
    kind: ClassVar[str] = "invgamma"
    a: float = 1.0
    b: float = 0.1

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise UsageError("inverse-gamma a and b must be positive")

    def initial_gamma(self, m1: int, m2: int, K: int) -> np.ndarray:
        value = self.b / (self.a - 1) if self.a > 1 else 1.0
        return np.full(K, float(value))

    def conditional(self, S: np.ndarray, m1: int, m2: int) -> InvGammaConditional:
        S = np.asarray(S, dtype=np.float64)
        shape = np.full(S.shape, self.a + (m1 + m2) / 2.0)
        return InvGammaConditional(shape=shape, rate=self.b + S / 2.0)


@dataclass(frozen=True)
class GammaPrior(_Prior):
    """Gamma((m1 + m2 + 1) / 2, rate = beta^2 / 2) on each gamma_h."""

    kind: ClassVar[str] = "gamma"
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise UsageError("beta must be positive")

    @classmethod
    def from_beta2(cls, beta2: float) -> "GammaPrior":
        if not beta2 > 0:
            raise UsageError("beta^2 must be positive")
        return cls(beta=math.sqrt(beta2))

    def shape(self, m1: int, m2: int) -> float:
        return (m1 + m2 + 1) / 2.0

    @property
    def rate(self) -> float:
        return self.beta**2 / 2.0

    def initial_gamma(self, m1: int, m2: int, K: int) -> np.ndarray:
        return np.full(K, (m1 + m2 + 1) / self.beta**2)

    def conditional(self, S: np.ndarray, m1: int, m2: int) -> InvGaussianConditional:
        S = np.maximum(np.asarray(S, dtype=np.float64), MIN_COLUMN_ENERGY)
        mu = self.beta / np.sqrt(S)
        return InvGaussianConditional(mu=mu, shape=np.full(S.shape, self.beta**2))


@dataclass(frozen=True)
class DiscretePrior(_Prior):
    """(1 - p) delta_epsilon + p delta_C: spike at epsilon, slab at C."""

    kind: ClassVar[str] = "discrete"
    epsilon: float = 0.05
    C: float = 1.0
    p: float = 0.05

    def __post_init__(self):
        if not (self.epsilon > 0 and self.C > 0):
            raise UsageError("epsilon and C must be positive")
        if self.epsilon > self.C:
            raise UsageError("epsilon must not exceed C")
        if not 0 < self.p < 1:
            raise UsageError("p must lie strictly inside (0, 1)")

    def initial_gamma(self, m1: int, m2: int, K: int) -> np.ndarray:
        return np.full(K, float(self.C))

    def log_weights(self, S: np.ndarray, m1: int, m2: int) -> tuple[np.ndarray, np.ndarray]:
        """Unnormalized log masses of the slab (C) and the spike (epsilon)."""
        S = np.asarray(S, dtype=np.float64)
        half = (m1 + m2) / 2.0
        log_slab = math.log(self.p) - half * math.log(self.C) - S / (2.0 * self.C)
        log_spike = math.log1p(-self.p) - half * math.log(self.epsilon) - S / (2.0 * self.epsilon)
        return log_slab, log_spike

    def slab_probability(self, S: np.ndarray, m1: int, m2: int) -> np.ndarray:
        log_slab, log_spike = self.log_weights(S, m1, m2)
        # 1 / (1 + exp(log_spike - log_slab)), overflow-free
        return expit(log_slab - log_spike)

    def conditional(self, S: np.ndarray, m1: int, m2: int) -> TwoPointConditional:
        return TwoPointConditional(
            prob_high=self.slab_probability(S, m1, m2), low=float(self.epsilon), high=float(self.C)
        )


PriorSpec = Union[FixedPrior, InverseGammaPrior, GammaPrior, DiscretePrior]

PRIOR_TYPES: dict[str, type] = {
    "fixed": FixedPrior,
    "invgamma": InverseGammaPrior,
    "gamma": GammaPrior,
    "discrete": DiscretePrior,
}


def prior_from_dict(data: dict[str, Any]) -> PriorSpec:
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in PRIOR_TYPES:
        raise UsageError(f"unknown prior kind {kind!r}; expected one of {sorted(PRIOR_TYPES)}")
    try:
        return PRIOR_TYPES[kind](**data)
    except TypeError as e:
        raise UsageError(f"bad parameters for prior {kind!r}: {e}")


__all__ = [
    "FixedPrior",
    "InverseGammaPrior",
    "GammaPrior",
    "DiscretePrior",
    "PriorSpec",
    "GammaConditional",
    "DiracConditional",
    "InvGammaConditional",
    "InvGaussianConditional",
    "TwoPointConditional",
    "prior_from_dict",
    "PRIOR_TYPES",
    "MIN_COLUMN_ENERGY",
]
