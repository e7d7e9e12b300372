import json
from pathlib import Path

import pytest

from lowrank_mc.config import THREADS_ENV, SamplerConfig, VBConfig, load_config_values, resolve_threads
from lowrank_mc.errors import DataError, UsageError


def test_default_lambda_gives_unit_noise_weight():
    config = SamplerConfig(noise_sd=0.5)
    assert config.resolve_lambda(200) == pytest.approx(200 / (2 * 0.25))
    assert config.likelihood_weight(200) == pytest.approx(4.0)
    assert config.likelihood_weight(0) == 0.0
    assert SamplerConfig(lambda_=3.0).likelihood_weight(6) == pytest.approx(1.0)


def test_retained_iterations():
    config = SamplerConfig(iterations=1000, burn_in=100, thinning=10)
    assert config.retained_count == 90
    assert config.is_retained(110) and not config.is_retained(100) and not config.is_retained(105)


def test_sampler_validation():
    with pytest.raises(UsageError):
        SamplerConfig(iterations=10, burn_in=10)
    with pytest.raises(UsageError):
        SamplerConfig(thinning=0)
    with pytest.raises(UsageError):
        SamplerConfig(seed=-1)
    with pytest.raises(UsageError):
        VBConfig(tol=-1.0)


def test_thread_resolution(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads() == 4
    monkeypatch.setenv(THREADS_ENV, "2")
    assert resolve_threads() == 2
    assert resolve_threads(6) == 6
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(UsageError):
        resolve_threads()


def test_config_values_merge_file_over_defaults(tmp_path: Path):
    values = load_config_values(None, default_K=10)
    assert values["K"] == 10 and values["iterations"] == 1000 and values["tol"] == 1e-4

    path = tmp_path / "sampler.json"
    path.write_text(json.dumps({"K": 7, "dense_cell_limit": 50, "init_sd2": 0.5, "colour": "red"}))
    values = load_config_values(path)
    sampler, vb = SamplerConfig.from_dict(values), VBConfig.from_dict(values)
    assert (sampler.K, sampler.dense_cell_limit, sampler.burn_in) == (7, 50, 100)
    assert (vb.K, vb.init_sd2, vb.max_iter) == (7, 0.5, 100)

    with pytest.raises(DataError):
        load_config_values(tmp_path / "missing.json")
    path.write_text("{not json")
    with pytest.raises(DataError):
        load_config_values(path)
