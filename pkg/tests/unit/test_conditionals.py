import math

import numpy as np
import pytest

from lowrank_mc.conditionals import (
    block_conditionals,
    column_sq_norms,
    gamma_conditional,
    likelihood_weight,
    marginal_log_prior_gamma_prior,
    marginal_prior_quadrature,
    row_conditional_M,
    row_conditional_N,
    verify_marginal_prior,
)
from lowrank_mc.errors import UsageError
from lowrank_mc.models import ObservationSet
from lowrank_mc.priors import GammaPrior, InverseGammaPrior
from lowrank_mc.random_streams import RngStream


def regression_oracle(X, y, gamma, w):
    """Conjugate Bayesian linear regression: y ~ N(X b, 1/w), b ~ N(0, diag(gamma))."""
    precision = np.diag(1.0 / gamma) + w * X.T @ X
    cov = np.linalg.inv(precision)
    return cov @ (w * X.T @ y), cov


def random_case(seed):
    rng = RngStream(seed)
    m1 = int(rng.integers(1, 4))
    m2 = int(rng.integers(1, 4))
    K = int(rng.integers(1, 3))
    n = int(rng.integers(0, 7))
    obs = ObservationSet(m1, m2, rng.integers(0, m1, n), rng.integers(0, m2, n), rng.normal(0, 2, n))
    M = rng.standard_normal((m1, K))
    N = rng.standard_normal((m2, K))
    gamma = 0.2 + rng.uniform(K) * 3
    lam = 0.5 + float(rng.uniform())
    return obs, M, N, gamma, lam


@pytest.mark.parametrize("seed", range(100))
def test_row_conditionals_match_regression_oracle(seed):
    obs, M, N, gamma, lam = random_case(seed)
    w = likelihood_weight(lam, obs.n)
    for i in range(obs.m1):
        pos = obs.row_index(i)
        mean, cov = regression_oracle(N[obs.cols[pos]], obs.values[pos], gamma, w)
        cond = row_conditional_M(i, N, gamma, obs, lam)
        assert np.allclose(cond.precision, cond.precision.T, atol=0)
        assert np.all(np.linalg.eigvalsh(cond.precision) > 0)
        assert np.allclose(cond.mean(), mean, atol=1e-10, rtol=0)
        assert np.allclose(cond.covariance(), cov, atol=1e-10, rtol=0)
    for j in range(obs.m2):
        pos = obs.col_index(j)
        mean, cov = regression_oracle(M[obs.rows[pos]], obs.values[pos], gamma, w)
        cond = row_conditional_N(j, M, gamma, obs, lam)
        assert np.allclose(cond.mean(), mean, atol=1e-10, rtol=0)
        assert np.allclose(cond.covariance(), cov, atol=1e-10, rtol=0)


def test_scalar_hand_computation():
    obs = ObservationSet.from_triplets(1, 1, [(0, 0, 2.0)])
    # n = 1, lambda = 0.5 -> weight 1; precision 1/2 + 1.5^2, linear term 2 * 1.5
    cond = row_conditional_M(0, np.array([[1.5]]), np.array([2.0]), obs, 0.5)
    assert cond.precision[0, 0] == pytest.approx(2.75)
    assert cond.mean()[0] == pytest.approx(3.0 / 2.75)


def test_empty_row_is_prior_only(small_obs):
    gamma = np.array([0.5, 4.0])
    cond = row_conditional_M(3, np.ones((3, 2)), gamma, small_obs, 1.0)
    assert np.allclose(cond.precision, np.diag([2.0, 0.25]))
    assert np.allclose(cond.mean(), 0.0)


def test_zero_observations_give_prior():
    obs = ObservationSet.from_triplets(2, 2, [])
    assert likelihood_weight(3.0, 0) == 0.0
    cond = row_conditional_N(1, np.ones((2, 1)), np.array([3.0]), obs, 1.0)
    assert np.allclose(cond.covariance(), [[3.0]])


def test_transpose_duality(small_obs):
    rng = RngStream(9)
    M = rng.standard_normal((4, 2))
    gamma = np.array([0.7, 1.3])
    for j in range(small_obs.m2):
        direct = row_conditional_N(j, M, gamma, small_obs, 2.0)
        mirrored = row_conditional_M(j, M, gamma, small_obs.transpose(), 2.0)
        assert np.allclose(direct.precision, mirrored.precision, atol=1e-14)
        assert np.allclose(direct.linear_term, mirrored.linear_term, atol=1e-14)


def test_block_conditionals_add_partner_covariance(small_obs):
    N = np.ones((3, 1))
    cov = np.full((3, 1, 1), 0.5)
    P0, _ = block_conditionals(small_obs, "M", N, np.array([1.0]), 1.0)
    P1, _ = block_conditionals(small_obs, "M", N, np.array([1.0]), 1.0, partner_cov=cov)
    assert np.allclose(P1[:, 0, 0] - P0[:, 0, 0], 0.5 * small_obs.row_counts())


def test_block_conditionals_slice_matches_full(small_obs):
    N = RngStream(4).standard_normal((3, 2))
    P, h = block_conditionals(small_obs, "M", N, np.array([1.0, 2.0]), 0.3)
    Ps, hs = block_conditionals(small_obs, "M", N, np.array([1.0, 2.0]), 0.3, start=1, stop=3)
    assert np.allclose(P[1:3], Ps)
    assert np.allclose(h[1:3], hs)


def test_row_conditional_depends_on_lambda_only_through_weight():
    # row 0 keeps its data while n doubles through entries in row 2
    base = [(0, 0, 1.5), (0, 1, -0.5), (1, 1, 2.0), (1, 0, 0.3)]
    extra = [(2, 0, 4.0), (2, 1, -1.0), (2, 1, 0.7), (2, 0, 2.2)]
    small = ObservationSet.from_triplets(3, 2, base)
    large = ObservationSet.from_triplets(3, 2, base + extra)
    N = np.array([[0.4, -1.2], [0.9, 0.3]])
    gamma = np.array([1.5, 0.4])
    for i in (0, 1):
        a = row_conditional_M(i, N, gamma, small, lambda_=3.0)
        b = row_conditional_M(i, N, gamma, large, lambda_=6.0)
        np.testing.assert_allclose(b.precision, a.precision, rtol=1e-12)
        np.testing.assert_allclose(b.linear_term, a.linear_term, rtol=1e-12)
    assert likelihood_weight(7.0, 4) == likelihood_weight(21.0, 12)


def test_row_index_out_of_range(small_obs):
    with pytest.raises(UsageError):
        row_conditional_M(4, np.ones((3, 1)), np.ones(1), small_obs, 1.0)
    with pytest.raises(UsageError):
        row_conditional_N(0, np.ones((4, 1)), np.zeros(1), small_obs, 1.0)


def test_gamma_conditional_uses_column_energies():
    M = np.array([[1.0, 0.0], [1.0, 2.0]])
    N = np.array([[2.0, 0.0]])
    assert list(column_sq_norms(M, N)) == [6.0, 4.0]
    cond = gamma_conditional(InverseGammaPrior(1.0, 0.1), M, N)
    assert np.allclose(cond.rate, [3.1, 2.1])
    assert np.allclose(cond.shape, 2.5)
    cond = gamma_conditional(GammaPrior(2.0), M, N)
    assert np.allclose(cond.mu, [2.0 / math.sqrt(6.0), 1.0])


def test_marginal_log_prior():
    M = np.array([[3.0, 0.0]])
    N = np.array([[4.0, 1.0]])
    assert marginal_log_prior_gamma_prior(M, N, 2.0) == pytest.approx(-2.0 * (5.0 + 1.0))


def test_marginal_prior_quadrature_is_constant_in_S():
    table = verify_marginal_prior()
    assert len(table) == 15
    assert (table["rel_error"] < 1e-6).all()
    for _, group in table.groupby("beta"):
        assert group["spread"].iloc[0] < 1e-6
    assert marginal_prior_quadrature(2.0, 1.0) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-8)
    with pytest.raises(UsageError):
        marginal_prior_quadrature(0.0, 1.0)
