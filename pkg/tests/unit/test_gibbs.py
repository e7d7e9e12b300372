import numpy as np
import pytest

from lowrank_mc import gibbs
from lowrank_mc.config import SamplerConfig
from lowrank_mc.errors import UsageError
from lowrank_mc.gibbs import GibbsRun, GibbsSampler, gibbs_sweep, row_chunks, run_gibbs
from lowrank_mc.models import ObservationSet, rmse
from lowrank_mc.priors import DiscretePrior, FixedPrior, GammaPrior, InverseGammaPrior
from lowrank_mc.random_streams import RngStream


def quick_config(**overrides):
    values = dict(K=3, iterations=40, burn_in=10, thinning=3, seed=11, threads=1, log_every=0)
    values.update(overrides)
    return SamplerConfig(**values)


def test_row_chunks_respect_entry_budget(monkeypatch):
    ptr = np.array([0, 3, 3, 10, 11, 20])
    assert row_chunks(ptr, K=1) == [(0, 5)]
    monkeypatch.setattr(gibbs, "ENTRY_FLOAT_BUDGET", 5)
    # a row over budget still gets its own task
    assert row_chunks(ptr, K=1) == [(0, 2), (2, 3), (3, 4), (4, 5)]


def test_same_seed_same_chain(synthetic_small):
    _, obs = synthetic_small
    a = run_gibbs(obs, GammaPrior(2.0), quick_config())
    b = run_gibbs(obs, GammaPrior(2.0), quick_config())
    assert np.array_equal(a.theta_mean, b.theta_mean)
    c = run_gibbs(obs, GammaPrior(2.0), quick_config(seed=12))
    assert not np.array_equal(a.theta_mean, c.theta_mean)


def test_thread_count_does_not_change_results(synthetic_small, monkeypatch):
    _, obs = synthetic_small
    monkeypatch.setattr(gibbs, "ENTRY_FLOAT_BUDGET", 40)
    serial = run_gibbs(obs, DiscretePrior(0.05, 1.0, 0.3), quick_config(threads=1))
    threaded = run_gibbs(obs, DiscretePrior(0.05, 1.0, 0.3), quick_config(threads=4))
    assert np.array_equal(serial.theta_mean, threaded.theta_mean)
    assert np.array_equal(np.asarray(serial.gamma_trace), np.asarray(threaded.gamma_trace))


def test_retained_count_and_traces(synthetic_small):
    truth, obs = synthetic_small
    summary = run_gibbs(obs, InverseGammaPrior(1.0, 0.1), quick_config(), reference=truth)
    assert summary.retained_count == (40 - 10) // 3
    assert summary.gamma_iterations == [13, 16, 19, 22, 25, 28, 31, 34, 37, 40]
    assert len(summary.rmse_trace) == 40
    assert summary.entry_traces.shape == (40, 9)
    assert all(g.shape == (3,) and np.all(g > 0) for g in summary.gamma_trace)

    last = run_gibbs(obs, InverseGammaPrior(1.0, 0.1), quick_config(iterations=100, burn_in=99, thinning=1))
    assert last.retained_count == 1


def test_posterior_mean_is_average_of_retained_iterates(synthetic_small):
    _, obs = synthetic_small
    config = quick_config()
    kept = []

    def collect(t, run):
        if config.is_retained(t):
            kept.append(run.state.theta())

    summary = GibbsSampler(GammaPrior(2.0), config, on_iteration=collect).run(obs)
    assert len(kept) == summary.retained_count
    assert np.allclose(summary.theta_mean, np.mean(kept, axis=0), atol=1e-12, rtol=0)


def test_fixed_prior_keeps_gamma():
    obs = ObservationSet.from_triplets(3, 2, [(0, 0, 1.0), (2, 1, -1.0)])
    summary = run_gibbs(obs, FixedPrior(0.7), quick_config(K=2))
    assert all(np.array_equal(g, [0.7, 0.7]) for g in summary.gamma_trace)


def test_zero_observations_sample_the_prior():
    obs = ObservationSet.from_triplets(2, 2, [])
    summary = run_gibbs(obs, FixedPrior(1.0), quick_config(K=1, iterations=400, burn_in=0, thinning=1))
    draws = summary.entry_traces[:, 0]
    # theta = M N with independent standard normals: mean 0, variance 1
    assert abs(draws.mean()) < 0.25
    assert 0.6 < draws.var() < 1.5


def test_sweeps_without_data_weight_draw_columns_at_gamma(synthetic_small):
    _, obs = synthetic_small
    config = quick_config(K=2)
    run = GibbsRun.start(obs, FixedPrior(2.5), config, RngStream(5).fork(0))
    run.weight = 0.0
    chain = RngStream(5)
    draws = []
    for t in range(1, 1001):
        gibbs_sweep(run, obs, chain.fork(t))
        draws.append(run.state.M.copy())
    column_var = np.concatenate(draws).var(axis=0)
    np.testing.assert_allclose(column_var, [2.5, 2.5], rtol=0.1)


def test_cells_mode_matches_dense(synthetic_small):
    _, obs = synthetic_small
    cells = (np.array([0, 5, 19]), np.array([3, 5, 0]))
    dense = run_gibbs(obs, GammaPrior(2.0), quick_config())
    sparse = run_gibbs(obs, GammaPrior(2.0), quick_config(dense_cell_limit=1), cells=cells)
    assert sparse.theta_mean is None
    assert np.allclose(sparse.cell_mean, dense.theta_mean[cells], atol=1e-10)
    assert np.allclose(sparse.predict(*cells), sparse.cell_mean)


def test_large_problem_without_cells_is_rejected(synthetic_small):
    _, obs = synthetic_small
    with pytest.raises(UsageError):
        run_gibbs(obs, GammaPrior(2.0), quick_config(dense_cell_limit=1))


def test_reference_shape_is_checked(synthetic_small):
    _, obs = synthetic_small
    with pytest.raises(UsageError):
        run_gibbs(obs, GammaPrior(2.0), quick_config(), reference=np.zeros((3, 3)))


def test_tracked_entries_override(synthetic_small):
    _, obs = synthetic_small
    summary = run_gibbs(obs, GammaPrior(2.0), quick_config(), tracked_entries=[(1, 2), (3, 4)])
    assert summary.tracked_entries == [(1, 2), (3, 4)]
    assert summary.entry_traces.shape == (40, 2)


def test_sampler_recovers_low_rank_truth(synthetic_small):
    truth, obs = synthetic_small
    config = quick_config(iterations=300, burn_in=100, thinning=2, noise_sd=0.5)
    summary = run_gibbs(obs, InverseGammaPrior(1.0, 0.1), config)
    baseline = rmse(np.zeros_like(truth), truth)
    assert rmse(summary.theta_mean, truth) < 0.5 * baseline


def _micro_posterior_distance(iterations, thinning):
    """Kolmogorov distance between the Gibbs marginal of theta and grid quadrature.

    1 x 1 matrix, K = 1, y = 1, gamma = 1, unit likelihood weight:
    p(M, N | y) ~ exp(-(1 - M N)^2 / 2 - M^2 / 2 - N^2 / 2).
    """
    obs = ObservationSet.from_triplets(1, 1, [(0, 0, 1.0)])
    config = SamplerConfig(K=1, iterations=iterations, burn_in=100, thinning=thinning, seed=5, threads=1, log_every=0)
    summary = run_gibbs(obs, FixedPrior(1.0), config)
    draws = summary.entry_traces[np.asarray(summary.gamma_iterations) - 1, 0]

    grid = np.linspace(-7.0, 7.0, 1401)
    Mg, Ng = np.meshgrid(grid, grid, indexing="ij")
    theta = (Mg * Ng).ravel()
    log_w = (-0.5 * (1.0 - Mg * Ng) ** 2 - 0.5 * Mg**2 - 0.5 * Ng**2).ravel()
    w = np.exp(log_w - log_w.max())
    order = np.argsort(theta)
    theta, cdf = theta[order], np.cumsum(w[order]) / w.sum()

    x = np.sort(draws)
    oracle = np.interp(x, theta, cdf)
    n = len(x)
    upper = np.arange(1, n + 1) / n - oracle
    lower = oracle - np.arange(0, n) / n
    return max(upper.max(), lower.max())


def test_micro_posterior_agrees_with_quadrature():
    assert _micro_posterior_distance(iterations=15100, thinning=3) < 0.04


@pytest.mark.slow
def test_micro_posterior_agrees_with_quadrature_long_run():
    assert _micro_posterior_distance(iterations=100100, thinning=1) < 0.02
