import pytest

from lowrank_mc.config import SamplerConfig
from lowrank_mc.errors import UsageError
from lowrank_mc.experiments import SyntheticSpec
from lowrank_mc.planner import plan_grid, plan_pairs
from lowrank_mc.priors import FixedPrior, GammaPrior


def test_plan_grid_nesting_order():
    specs = [SyntheticSpec(m=10), SyntheticSpec(m=20)]
    config = SamplerConfig(K=2, iterations=50, burn_in=10)
    priors = [(FixedPrior(1.0), config), (GammaPrior(2.0), config)]
    cells = plan_grid(specs, priors, replicates=3)
    assert len(cells) == 12
    assert [c.index for c in cells] == list(range(12))
    assert [c.replicate for c in cells[:3]] == [0, 1, 2]
    assert cells[3].prior == GammaPrior(2.0)
    assert cells[6].spec.m == 20
    d0 = cells[0].to_dict()
    assert d0["m"] == 10 and d0["K"] == 2 and d0["iterations"] == 50
    assert d0["prior"] == {"kind": "fixed", "gamma0": 1.0}
    assert "rep=0" in cells[0].label


def test_plan_grid_rejects_empty_input():
    with pytest.raises(UsageError):
        plan_grid([], [(FixedPrior(1.0), SamplerConfig())])
    with pytest.raises(UsageError):
        plan_grid([SyntheticSpec(m=10)], [(FixedPrior(1.0), SamplerConfig())], replicates=0)


def test_plan_pairs_keeps_pair_order():
    pairs = [
        (SyntheticSpec(m=10), FixedPrior(0.2), SamplerConfig(K=5)),
        (SyntheticSpec(m=20), FixedPrior(1.0), SamplerConfig(K=5)),
    ]
    cells = plan_pairs(pairs, replicates=2)
    assert [(c.spec.m, c.replicate) for c in cells] == [(10, 0), (10, 1), (20, 0), (20, 1)]
