"""Bayesian low-rank matrix completion: Gibbs sampling and variational Bayes.

Public surface kept small; the CLI lives in ``lowrank_mc.cli``.
"""

from .config import SamplerConfig, VBConfig
from .datasets import parse_ratings, train_test_split
from .gibbs import GibbsSampler, run_gibbs
from .models import FactorState, ObservationSet, PosteriorSummary, holdout_rmse
from .priors import DiscretePrior, FixedPrior, GammaPrior, InverseGammaPrior
from .vb import run_vb

__all__ = [
    "SamplerConfig",
    "VBConfig",
    "ObservationSet",
    "FactorState",
    "PosteriorSummary",
    "FixedPrior",
    "InverseGammaPrior",
    "GammaPrior",
    "DiscretePrior",
    "GibbsSampler",
    "run_gibbs",
    "run_vb",
    "parse_ratings",
    "train_test_split",
    "holdout_rmse",
    "main",
]


def main() -> int:
    """Run the command-line interface."""
    from .cli import main as cli_main

    return cli_main()
