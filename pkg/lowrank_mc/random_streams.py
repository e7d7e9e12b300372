"""Seedable random streams and the variate generators used by the samplers.

Streams are Philox generators keyed by ``SeedSequence(seed, spawn_key=path)``;
``fork(child)`` appends to the path, so a stream is fully determined by the
seed and its fork path, never by the order in which siblings were created.
The samplers fork as (chain, iteration, block) and draw one standard-normal
row per matrix row from the block stream.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf

from .errors import NumericalError, UsageError

ArrayLike = Union[float, np.ndarray]


class RngStream:
    def __init__(self, seed: int, path: Sequence[int] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def fork(self, child_id: int) -> "RngStream":
        if child_id < 0:
            raise UsageError("child stream ids must be nonnegative")
        return RngStream(self.seed, self.path + (child_id,))

    def standard_normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def normal(self, loc: ArrayLike = 0.0, scale: ArrayLike = 1.0, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size)

    def uniform(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def gamma(self, shape: ArrayLike, scale: ArrayLike = 1.0, size=None) -> np.ndarray:
        return self._gen.gamma(shape, scale, size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = True) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


# --- Cholesky helpers --------------------------------------------------------


def cholesky_lower(precision: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; NumericalError carries the failing minor."""
    precision = np.asarray(precision, dtype=np.float64)
    if not np.all(np.isfinite(precision)):
        raise NumericalError(1, message="precision has non-finite entries")
    c, info = dpotrf(precision, lower=1, clean=1)
    if info > 0:
        raise NumericalError(int(info))
    if info < 0:
        raise UsageError(f"invalid argument {-info} to the Cholesky factorization")
    return c


def cholesky_batch(precisions: np.ndarray, block: Optional[str] = None, offset: int = 0) -> np.ndarray:
    """Stacked lower factors of (B, K, K) precisions.

    On failure the first offending matrix is located and reported with
    ``row = offset + position``.
    """
    if not np.all(np.isfinite(precisions)):
        bad = int(np.flatnonzero(~np.isfinite(precisions).reshape(len(precisions), -1).all(axis=1))[0])
        raise NumericalError(1, block=block, row=offset + bad, message="precision has non-finite entries")
    try:
        return np.linalg.cholesky(precisions)
    except np.linalg.LinAlgError:
        for pos, p in enumerate(precisions):
            try:
                cholesky_lower(p)
            except NumericalError as e:
                raise e.with_context(block or "?", offset + pos)
        raise


# --- Variates ----------------------------------------------------------------


def sample_mvn_from_precision(
    precision: np.ndarray, linear_term: np.ndarray, rng: RngStream
) -> np.ndarray:
    """Draw x ~ N(P^-1 h, P^-1) without forming the covariance."""
    L = cholesky_lower(precision)
    h = np.asarray(linear_term, dtype=np.float64)
    mean = cho_solve((L, True), h)
    z = rng.standard_normal(h.shape[0])
    return mean + solve_triangular(L.T, z, lower=False)


def sample_mvn_batch(
    precisions: np.ndarray,
    linear_terms: np.ndarray,
    z: np.ndarray,
    block: Optional[str] = None,
    offset: int = 0,
) -> np.ndarray:
    """Row-wise draws for a whole block given pre-drawn standard normals.

    With P = L L^T: x = L^-T (L^-1 h + z), i.e. mean P^-1 h plus L^-T z.
    """
    L = cholesky_batch(precisions, block=block, offset=offset)
    w = np.linalg.solve(L, linear_terms[..., None])
    return np.linalg.solve(np.swapaxes(L, -1, -2), w + z[..., None])[..., 0]


def sample_inverse_gamma(shape: ArrayLike, rate: ArrayLike, rng: RngStream, size=None) -> np.ndarray:
    """1/g with g ~ Gamma(shape, rate); density ~ x^(-shape-1) exp(-rate/x)."""
    shape = np.asarray(shape, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    if not (np.all(shape > 0) and np.all(rate > 0)):
        raise UsageError("inverse-gamma shape and rate must be positive")
    return 1.0 / rng.gamma(shape, 1.0 / rate, size)


def sample_inverse_gaussian(mu: ArrayLike, lambda_ig: ArrayLike, rng: RngStream, size=None) -> np.ndarray:
    """Inverse-Gaussian draws by the chi-square transformation with one root choice.

    The smaller root is obtained as mu^2 / (larger root), which avoids the
    cancellation of the textbook formula when mu / lambda is large.
    """
    mu = np.asarray(mu, dtype=np.float64)
    lam = np.asarray(lambda_ig, dtype=np.float64)
    if not (np.all(mu > 0) and np.all(lam > 0)):
        raise UsageError("inverse-Gaussian mean and shape must be positive")
    if size is None:
        size = np.broadcast(mu, lam).shape
    y = rng.standard_normal(size) ** 2
    my = mu * y
    big = mu + (mu / (2.0 * lam)) * (my + np.sqrt(4.0 * lam * my + my * my))
    small = mu * mu / big
    u = rng.uniform(size)
    return np.where(u <= mu / (mu + small), small, big)


def sample_bernoulli(prob: ArrayLike, rng: RngStream, size=None) -> np.ndarray:
    prob = np.asarray(prob, dtype=np.float64)
    if np.any(prob < 0) or np.any(prob > 1) or np.any(np.isnan(prob)):
        raise UsageError("Bernoulli probability must lie in [0, 1]")
    if size is None:
        size = prob.shape
    return (rng.uniform(size) < prob).astype(np.int64)


__all__ = [
    "RngStream",
    "cholesky_lower",
    "cholesky_batch",
    "sample_mvn_from_precision",
    "sample_mvn_batch",
    "sample_inverse_gamma",
    "sample_inverse_gaussian",
    "sample_bernoulli",
]
