from dataclasses import replace

import numpy as np
import pytest

from lowrank_mc.config import SamplerConfig, VBConfig
from lowrank_mc.diagnostics import acf_table, lags_to_threshold
from lowrank_mc.errors import UsageError
from lowrank_mc.experiments import (
    GROWING_K_PRESETS,
    GROWING_M_PRESETS,
    GROWING_M_REPORTED,
    ExperimentResult,
    SyntheticSpec,
    compare_backends,
    generate_synthetic,
    growing_k_pairs,
    growing_m_pairs,
    pick_entries,
    run_cells,
    run_grid,
    summarize_results,
)
from lowrank_mc.gibbs import run_gibbs
from lowrank_mc.models import rmse
from lowrank_mc.planner import plan_pairs
from lowrank_mc.priors import GammaPrior, InverseGammaPrior
from lowrank_mc.random_streams import RngStream

FAST = SamplerConfig(K=3, iterations=30, burn_in=10, thinning=2, seed=0, threads=1, log_every=0)


def test_truth_has_requested_rank():
    truth, obs = generate_synthetic(SyntheticSpec(m=30, r=3, seed=1), RngStream(1).fork(0))
    assert truth.shape == (30, 30)
    assert np.linalg.matrix_rank(truth) == 3
    assert obs.n == 180


@pytest.mark.parametrize("factor_scale, expected", [("variance", 2 * 4.0**2), ("sd", 2 * 4.0**4)])
def test_truth_entry_variance(factor_scale, expected):
    spec = SyntheticSpec(m=400, r=2, scale=4.0, factor_scale=factor_scale, seed=2)
    truth, _ = generate_synthetic(spec, RngStream(2).fork(0))
    assert 0.7 < truth.var() / expected < 1.3


def test_default_scale_shrinks_with_m():
    assert SyntheticSpec(m=100).scale_value == pytest.approx(2.0)
    assert SyntheticSpec(m=400).entry_sd == pytest.approx(1.0)
    assert SyntheticSpec(m=100, factor_scale="sd").entry_sd == pytest.approx(2.0)


def test_observation_count_rounds_half_up():
    assert SyntheticSpec(m=10, observe_fraction=0.25).n == 25
    assert SyntheticSpec(m=3, r=1, observe_fraction=0.5).n == 5


def test_full_noiseless_mask_tiles_the_matrix():
    spec = SyntheticSpec(m=6, r=2, observe_fraction=1.0, noise_sd=0.0, with_replacement=False)
    truth, obs = generate_synthetic(spec, RngStream(0).fork(0))
    assert obs.n == 36
    assert len(set(zip(obs.rows.tolist(), obs.cols.tolist()))) == 36
    assert np.array_equal(obs.values, truth[obs.rows, obs.cols])


def test_spec_validation():
    with pytest.raises(UsageError):
        SyntheticSpec(m=3, r=4)
    with pytest.raises(UsageError):
        SyntheticSpec(m=10, observe_fraction=0.0)
    with pytest.raises(UsageError):
        SyntheticSpec(m=10, factor_scale="other")


def test_single_cell_grid_equals_direct_run():
    spec = SyntheticSpec(m=15, r=2, seed=4)
    prior = InverseGammaPrior(1.0, 0.1)
    [result] = run_grid([spec], [(prior, FAST)])
    truth, obs = generate_synthetic(spec, RngStream(4).fork(0))
    direct = run_gibbs(obs, prior, replace(FAST, chain=0), reference=truth)
    assert result.rmse == rmse(direct.theta_mean, truth)
    assert result.retained_count == direct.retained_count
    row = result.to_row()
    assert row["prior"] == "invgamma"
    assert row["hyperparams"] == "a=1;b=0.1"


def test_grid_is_reproducible_across_workers():
    pairs = [(SyntheticSpec(m=12, seed=1), GammaPrior(2.0), FAST), (SyntheticSpec(m=14, seed=1), GammaPrior(2.0), FAST)]
    cells = plan_pairs(pairs, replicates=2)
    serial = run_cells(cells, workers=1)
    threaded = run_cells(cells, workers=3)
    assert [r.rmse for r in serial] == [r.rmse for r in threaded]
    assert [(r.m, r.replicate) for r in serial] == [(12, 0), (12, 1), (14, 0), (14, 1)]
    # replicates see different data
    assert serial[0].rmse != serial[1].rmse


def make_result(rmse_value, replicate, m=100):
    return ExperimentResult(
        m=m, K=5, r=2, prior="fixed", hyperparams={"gamma0": 0.2}, seed=0,
        replicate=replicate, rmse=rmse_value, seconds=1.0, retained_count=90,
    )


def test_summarize_results():
    summary = summarize_results([make_result(0.2, 0), make_result(0.4, 1), make_result(0.5, 0, m=200)])
    assert list(summary.columns) == ["m", "K", "prior", "hyperparams", "rmse_mean", "rmse_sd", "replicates"]
    first = summary.iloc[0]
    assert first["rmse_mean"] == pytest.approx(0.3)
    assert first["rmse_sd"] == pytest.approx(np.std([0.2, 0.4], ddof=1))
    assert first["replicates"] == 2
    assert summary.iloc[1]["rmse_sd"] == 0.0
    assert summarize_results([]).empty


def test_presets():
    pairs = growing_m_pairs()
    assert len(pairs) == 16
    assert all(config.K == 5 for _, _, config in pairs)
    assert {prior.kind for _, prior, _ in pairs} == {"fixed", "gamma", "invgamma", "discrete"}
    assert GROWING_M_PRESETS[1000][2] == InverseGammaPrior(1, 0.007)
    assert set(GROWING_M_REPORTED) == set(GROWING_M_PRESETS)
    k_pairs = growing_k_pairs(Ks=(2, 20), kinds=["gamma"])
    assert [(config.K, spec.m) for spec, _, config in k_pairs] == [(2, 500), (20, 500)]
    assert k_pairs[1][1] == GROWING_K_PRESETS[20][1]
    with pytest.raises(UsageError):
        growing_m_pairs(ms=(300,))


def test_pick_entries_come_from_observed_cells(synthetic_small):
    _, obs = synthetic_small
    entries = pick_entries(obs, 5, seed=1)
    assert entries == pick_entries(obs, 5, seed=1)
    observed = set(zip(obs.rows.tolist(), obs.cols.tolist()))
    assert len(entries) == 5 and set(entries) <= observed


def test_compare_backends(synthetic_small):
    _, obs = synthetic_small
    train = obs.subset(np.arange(0, obs.n, 2))
    test = obs.subset(np.arange(1, obs.n, 2))
    prior = InverseGammaPrior(1.0, 0.1)
    out = compare_backends(
        train,
        test,
        prior,
        replace(FAST, iterations=60, noise_sd=0.5),
        VBConfig(K=3, max_iter=30, noise_sd=0.5, threads=1),
    )
    assert len(out.entries) == 9
    assert out.gibbs_draws.shape == (out.gibbs.retained_count, 9)
    assert (out.entries["vb_sd"] > 0).all()
    assert (out.entries["gibbs_q05"] <= out.entries["gibbs_q95"]).all()
    assert np.isfinite(out.gibbs_rmse) and np.isfinite(out.vb_rmse)
    with pytest.raises(UsageError):
        compare_backends(train, test, GammaPrior(1.0), FAST, VBConfig(K=3))


@pytest.mark.slow
def test_growing_m_reproduces_reported_errors():
    cells = plan_pairs(growing_m_pairs(ms=(100, 200), base=SamplerConfig(log_every=0)), replicates=3)
    summary = summarize_results(run_cells(cells, workers=4))
    means = {(int(row.m), row.prior): row.rmse_mean for row in summary.itertuples()}
    assert len(means) == 8
    for (m, kind), value in means.items():
        assert abs(value - GROWING_M_REPORTED[m][kind]) < 0.08, (m, kind, value)
    for kind in ("fixed", "gamma", "invgamma", "discrete"):
        assert means[(200, kind)] < means[(100, kind)]


@pytest.mark.slow
def test_adaptive_priors_hold_their_error_as_K_grows():
    pairs = growing_k_pairs(base=SamplerConfig(log_every=0), kinds=["fixed", "gamma", "discrete"])
    summary = summarize_results(run_cells(plan_pairs(pairs, replicates=2), workers=4))
    means = {(int(row.K), row.prior): row.rmse_mean for row in summary.itertuples()}
    for K in (2, 5, 10, 20):
        for kind in ("gamma", "discrete"):
            assert 0.17 <= means[(K, kind)] <= 0.28, (K, kind, means[(K, kind)])
    assert means[(20, "fixed")] - means[(2, "fixed")] > 0.10


@pytest.mark.slow
def test_discrete_prior_chain_mixes_within_three_lags():
    spec = SyntheticSpec(m=200, seed=0)
    truth, obs = generate_synthetic(spec, RngStream(spec.seed).fork(0))
    prior = GROWING_M_PRESETS[200][3]
    config = SamplerConfig(K=5, log_every=0)
    summary = run_gibbs(obs, prior, config, reference=truth)
    table = acf_table(summary.entry_traces, summary.tracked_entries, max_lag=10, start=config.burn_in)
    lags = lags_to_threshold(table, 0.2)
    assert len(lags) == 9
    assert int((lags <= 3).sum()) >= 7
