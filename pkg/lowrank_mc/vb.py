"""Coordinate-ascent variational Bayes under the inverse-gamma prior.

q(M) q(N) q(gamma) with Gaussian row factors and inverse-gamma column
scales IG(a + (m1 + m2) / 2, b_k). Updates run M -> N -> gamma until the
predicted training entries stop moving.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conditionals import Block, block_conditionals
from .config import VBConfig
from .errors import NumericalError, UsageError
from .gibbs import row_chunks
from .logging_utils import get_logger
from .models import ObservationSet, holdout_rmse
from .priors import InverseGammaPrior
from .random_streams import RngStream, cholesky_batch

log = get_logger("vb")


@dataclass
class VBState:
    m_rows: np.ndarray  # (m1, K) means of the rows of M
    V: np.ndarray  # (m1, K, K) row covariances of M
    n_rows: np.ndarray  # (m2, K)
    W: np.ndarray  # (m2, K, K)
    b: np.ndarray  # (K,) inverse-gamma rates
    shape: float  # a + (m1 + m2) / 2, fixed

    @property
    def K(self) -> int:
        return self.m_rows.shape[1]

    def gamma_precision(self) -> np.ndarray:
        """E_q[1 / gamma_k]."""
        return self.shape / self.b

    def predict(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return np.einsum("ek,ek->e", self.m_rows[rows], self.n_rows[cols])

    def theta(self) -> np.ndarray:
        return self.m_rows @ self.n_rows.T

    def transposed(self) -> "VBState":
        return VBState(self.n_rows, self.W, self.m_rows, self.V, self.b, self.shape)

    def copy(self) -> "VBState":
        return VBState(
            self.m_rows.copy(), self.V.copy(), self.n_rows.copy(), self.W.copy(), self.b.copy(), self.shape
        )


@dataclass
class VBResult:
    state: VBState
    converged: bool
    iterations: int
    deltas: list[float] = field(default_factory=list)
    test_rmse_trace: list[float] = field(default_factory=list)

    def predict(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return self.state.predict(rows, cols)


def init_vb_state(m1: int, m2: int, prior: InverseGammaPrior, config: VBConfig, rng: RngStream) -> VBState:
    K = config.K
    sd = np.sqrt(config.init_sd2)
    m_rows = rng.standard_normal((m1, K)) * sd
    n_rows = rng.standard_normal((m2, K)) * sd
    V = np.broadcast_to(config.init_sd2 * np.eye(K), (m1, K, K)).copy()
    W = np.broadcast_to(config.init_sd2 * np.eye(K), (m2, K, K)).copy()
    b = np.full(K, prior.b + (m1 + m2) / 20.0)
    return VBState(m_rows, V, n_rows, W, b, prior.a + (m1 + m2) / 2.0)


def assert_spd(covariances: np.ndarray, block: str) -> None:
    if not np.allclose(covariances, np.swapaxes(covariances, -1, -2), rtol=1e-10, atol=1e-12):
        raise NumericalError(1, block=block, message="covariance lost symmetry")
    cholesky_batch(covariances, block=block)


def _moments(P: np.ndarray, h: np.ndarray, block: str, offset: int) -> tuple[np.ndarray, np.ndarray]:
    """Covariance P^-1 and mean P^-1 h through the Cholesky factor."""
    L = cholesky_batch(P, block=block, offset=offset)
    eye = np.broadcast_to(np.eye(P.shape[-1]), P.shape)
    Linv = np.linalg.solve(L, eye)
    cov = np.swapaxes(Linv, -1, -2) @ Linv
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    mean = (cov @ h[..., None])[..., 0]
    return mean, cov


def _update_block(
    obs: ObservationSet,
    block: Block,
    partner_mean: np.ndarray,
    partner_cov: np.ndarray,
    prior_precision: np.ndarray,
    weight: float,
    executor: Optional[ThreadPoolExecutor],
) -> tuple[np.ndarray, np.ndarray]:
    ptr = obs.row_ptr if block == "M" else obs.col_ptr
    r = len(ptr) - 1
    K = partner_mean.shape[1]
    means = np.empty((r, K))
    covs = np.empty((r, K, K))
    chunks = row_chunks(ptr, K)

    def task(bounds: tuple[int, int]) -> None:
        start, stop = bounds
        P, h = block_conditionals(
            obs, block, partner_mean, prior_precision, weight, start, stop, partner_cov=partner_cov
        )
        means[start:stop], covs[start:stop] = _moments(P, h, block, start)

    if executor is not None and len(chunks) > 1:
        list(executor.map(task, chunks))
    else:
        for bounds in chunks:
            task(bounds)
    return means, covs


def vb_update_M(
    state: VBState,
    obs: ObservationSet,
    weight: float,
    executor: Optional[ThreadPoolExecutor] = None,
) -> VBState:
    """Refresh (m_rows, V) in place; ``weight`` is 2 * lambda / n."""
    state.m_rows, state.V = _update_block(
        obs, "M", state.n_rows, state.W, state.gamma_precision(), weight, executor
    )
    assert_spd(state.V, "M")
    return state


def vb_update_N(
    state: VBState,
    obs: ObservationSet,
    weight: float,
    executor: Optional[ThreadPoolExecutor] = None,
) -> VBState:
    state.n_rows, state.W = _update_block(
        obs, "N", state.m_rows, state.V, state.gamma_precision(), weight, executor
    )
    assert_spd(state.W, "N")
    return state


def vb_update_gamma(state: VBState, b_prior: float) -> VBState:
    energy = (
        np.einsum("ik,ik->k", state.m_rows, state.m_rows)
        + np.einsum("ikk->k", state.V)
        + np.einsum("jk,jk->k", state.n_rows, state.n_rows)
        + np.einsum("jkk->k", state.W)
    )
    state.b = 0.5 * energy + b_prior
    return state


def vb_cycle(
    state: VBState,
    obs: ObservationSet,
    weight: float,
    b_prior: float,
    executor: Optional[ThreadPoolExecutor] = None,
) -> VBState:
    vb_update_M(state, obs, weight, executor)
    vb_update_N(state, obs, weight, executor)
    vb_update_gamma(state, b_prior)
    return state


def run_vb(
    obs: ObservationSet,
    config: VBConfig,
    prior: InverseGammaPrior,
    init: Optional[VBState] = None,
    test: Optional[ObservationSet] = None,
) -> VBResult:
    """Iterate until the largest change of a predicted training entry is below ``config.tol``.

    Convergence is never declared on the first cycle. Hitting ``max_iter``
    returns ``converged=False``.
    """
    if not isinstance(prior, InverseGammaPrior):
        raise UsageError("variational Bayes supports the inverse-gamma prior only")
    if init is None:
        state = init_vb_state(obs.m1, obs.m2, prior, config, RngStream(config.seed).fork(0))
    else:
        if init.m_rows.shape != (obs.m1, config.K) or init.n_rows.shape != (obs.m2, config.K):
            raise UsageError("initial state does not match the observation shape and K")
        state = init.copy()
    weight = config.likelihood_weight(obs.n)
    result = VBResult(state=state, converged=False, iterations=0)
    workers = config.worker_count()
    log.info(
        "VB start: %dx%d, n=%d, K=%d, prior=%s, weight=%.6g",
        obs.m1, obs.m2, obs.n, config.K, prior.describe(), weight,
    )
    previous = state.predict(obs.rows, obs.cols)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        pool = executor if workers > 1 else None
        for it in range(1, config.max_iter + 1):
            vb_cycle(state, obs, weight, prior.b, pool)
            current = state.predict(obs.rows, obs.cols)
            delta = float(np.max(np.abs(current - previous), initial=0.0))
            previous = current
            result.iterations = it
            result.deltas.append(delta)
            if test is not None and test.n:
                result.test_rmse_trace.append(holdout_rmse(state, test))
            log.debug("VB iter %d: delta=%.3g", it, delta)
            if it > 1 and delta < config.tol:
                result.converged = True
                break
    if result.converged:
        log.info("VB converged after %d iterations", result.iterations)
    else:
        log.warning("VB hit max_iter=%d without converging (last delta %.3g)", config.max_iter, result.deltas[-1])
    return result


def entry_moments(state: VBState, rows: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of theta_ij = <M_i, N_j> under q."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    m = state.m_rows[rows]
    n = state.n_rows[cols]
    V = state.V[rows]
    W = state.W[cols]
    mean = np.einsum("ek,ek->e", m, n)
    var = (
        np.einsum("ek,ekl,el->e", m, W, m)
        + np.einsum("ek,ekl,el->e", n, V, n)
        + np.einsum("ekl,elk->e", V, W)
    )
    return mean, var


__all__ = [
    "VBState",
    "VBResult",
    "init_vb_state",
    "vb_update_M",
    "vb_update_N",
    "vb_update_gamma",
    "vb_cycle",
    "run_vb",
    "entry_moments",
    "assert_spd",
]
