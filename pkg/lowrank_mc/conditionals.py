"""Closed-form full conditionals of the factor model.

Rows of M given (N, gamma, Y) are independent Gaussians with precision
``diag(gamma)^-1 + w * sum_k N_{j_k} N_{j_k}^T`` and linear term
``w * sum_k Y_k N_{j_k}`` over the entries k of the row, where
``w = 2 * lambda / n``. Rows of N are the mirror image. The same assembly
serves the variational updates, which add the partner covariances to the
outer products and use a different diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Optional

import numpy as np
import pandas as pd
from scipy import integrate, sparse
from scipy.linalg import cho_solve

from .errors import UsageError
from .models import ObservationSet
from .priors import GammaConditional, PriorSpec
from .random_streams import cholesky_lower

Block = Literal["M", "N"]


@dataclass
class RowConditional:
    """Gaussian in information form: mean = precision^-1 @ linear_term."""

    precision: np.ndarray
    linear_term: np.ndarray

    def mean(self) -> np.ndarray:
        return cho_solve((cholesky_lower(self.precision), True), self.linear_term)

    def covariance(self) -> np.ndarray:
        K = self.linear_term.shape[0]
        return cho_solve((cholesky_lower(self.precision), True), np.eye(K))


def column_sq_norms(M: np.ndarray, N: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    N = np.asarray(N, dtype=np.float64)
    if M.shape[1] != N.shape[1]:
        raise UsageError(f"inconsistent K: {M.shape[1]} vs {N.shape[1]}")
    return np.einsum("ih,ih->h", M, M) + np.einsum("jh,jh->h", N, N)


def likelihood_weight(lambda_: float, n: int) -> float:
    return 0.0 if n == 0 else 2.0 * lambda_ / n


def _grouping(obs: ObservationSet, block: Block) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if block == "M":
        return obs.row_order, obs.row_ptr, obs.cols
    if block == "N":
        return obs.col_order, obs.col_ptr, obs.rows
    raise UsageError(f"unknown block {block!r}")


def block_conditionals(
    obs: ObservationSet,
    block: Block,
    partner: np.ndarray,
    prior_precision: np.ndarray,
    weight: float,
    start: int = 0,
    stop: Optional[int] = None,
    partner_cov: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked precisions (r, K, K) and linear terms (r, K) for rows [start, stop).

    ``partner`` is N when block == "M" and M when block == "N".
    ``partner_cov`` (rows of the partner, K, K) is added to each outer
    product; the Gibbs sampler leaves it None.
    """
    order, ptr, partner_idx = _grouping(obs, block)
    if stop is None:
        stop = len(ptr) - 1
    K = partner.shape[1]
    r = stop - start
    lo, hi = int(ptr[start]), int(ptr[stop])
    e = hi - lo
    precisions = np.zeros((r, K, K))
    linear = np.zeros((r, K))
    if e > 0 and weight != 0.0:
        pos = order[lo:hi]
        who = partner_idx[pos]
        F = partner[who]
        second = F[:, :, None] * F[:, None, :]
        if partner_cov is not None:
            second = second + partner_cov[who]
        indicator = sparse.csr_matrix(
            (np.ones(e), np.arange(e), ptr[start : stop + 1] - lo), shape=(r, e)
        )
        precisions = weight * np.asarray(indicator @ second.reshape(e, K * K)).reshape(r, K, K)
        linear = weight * np.asarray(indicator @ (obs.values[pos][:, None] * F))
    diag = np.arange(K)
    precisions[:, diag, diag] += prior_precision
    return precisions, linear


def _check_gamma(gamma: np.ndarray) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=np.float64)
    if not np.all(gamma > 0):
        raise UsageError("gamma entries must be positive")
    return gamma


def row_conditional_M(
    i: int, N: np.ndarray, gamma: np.ndarray, obs: ObservationSet, lambda_: float
) -> RowConditional:
    if not 0 <= i < obs.m1:
        raise UsageError(f"row {i} out of range [0, {obs.m1})")
    gamma = _check_gamma(gamma)
    P, h = block_conditionals(obs, "M", N, 1.0 / gamma, likelihood_weight(lambda_, obs.n), i, i + 1)
    return RowConditional(P[0], h[0])


def row_conditional_N(
    j: int, M: np.ndarray, gamma: np.ndarray, obs: ObservationSet, lambda_: float
) -> RowConditional:
    if not 0 <= j < obs.m2:
        raise UsageError(f"column {j} out of range [0, {obs.m2})")
    gamma = _check_gamma(gamma)
    P, h = block_conditionals(obs, "N", M, 1.0 / gamma, likelihood_weight(lambda_, obs.n), j, j + 1)
    return RowConditional(P[0], h[0])


def gamma_conditional(prior: PriorSpec, M: np.ndarray, N: np.ndarray) -> GammaConditional:
    S = column_sq_norms(M, N)
    return prior.conditional(S, M.shape[0], N.shape[0])


# --- Marginal prior under the gamma prior -----------------------------------


def marginal_log_prior_gamma_prior(M: np.ndarray, N: np.ndarray, beta: float) -> float:
    """log of the gamma-marginalized prior of (M, N), up to a constant: -beta * sum_h sqrt(S_h)."""
    if not beta > 0:
        raise UsageError("beta must be positive")
    return float(-beta * np.sum(np.sqrt(column_sq_norms(M, N))))


def marginal_prior_quadrature(S: float, beta: float) -> float:
    """exp(beta sqrt(S)) * int_0^inf g^(-1/2) exp(-S/(2g) - beta^2 g / 2) dg.

    The integrand is the per-column product of the N(0, g) column density
    (up to the (2 pi)^(-d/2) factor) and the gamma prior density; the result
    equals sqrt(2 pi) / beta for every S > 0. The interval is split at the
    mode so both pieces are smooth for quad.
    """
    if not (S > 0 and beta > 0):
        raise UsageError("S and beta must be positive")
    shift = beta * math.sqrt(S)

    def integrand(g: float) -> float:
        if g <= 0.0:
            return 0.0
        return math.exp(-0.5 * math.log(g) - S / (2.0 * g) - 0.5 * beta * beta * g + shift)

    mode = (-1.0 + math.sqrt(1.0 + 4.0 * beta * beta * S)) / (2.0 * beta * beta)
    left, _ = integrate.quad(integrand, 0.0, mode, epsabs=0.0, epsrel=1e-12, limit=200)
    right, _ = integrate.quad(integrand, mode, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return left + right


def verify_marginal_prior(
    S_values: Iterable[float] = (0.1, 1.0, 4.0, 10.0, 100.0),
    betas: Iterable[float] = (0.5, 1.0, 5.0),
) -> pd.DataFrame:
    """Quadrature of the mixing integral against exp(-beta sqrt(S)).

    ``ratio`` is the integral divided by exp(-beta sqrt(S)); it must be the
    same constant (sqrt(2 pi) / beta) for every S at a given beta.
    """
    records = []
    for beta in betas:
        constant = math.sqrt(2.0 * math.pi) / beta
        for S in S_values:
            ratio = marginal_prior_quadrature(S, beta)
            records.append(
                {
                    "S": float(S),
                    "beta": float(beta),
                    "ratio": ratio,
                    "constant": constant,
                    "rel_error": abs(ratio / constant - 1.0),
                    "log_prior": -beta * math.sqrt(S),
                }
            )
    table = pd.DataFrame.from_records(records)
    spread = table.groupby("beta")["ratio"].transform(lambda r: (r.max() - r.min()) / r.mean())
    table["spread"] = spread
    return table


__all__ = [
    "RowConditional",
    "column_sq_norms",
    "likelihood_weight",
    "block_conditionals",
    "row_conditional_M",
    "row_conditional_N",
    "gamma_conditional",
    "marginal_log_prior_gamma_prior",
    "marginal_prior_quadrature",
    "verify_marginal_prior",
]
