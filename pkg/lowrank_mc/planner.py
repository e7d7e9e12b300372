from __future__ import annotations

from dataclasses import asdict
from typing import Any, Dict, List, Sequence, Tuple

from .config import SamplerConfig
from .errors import UsageError
from .experiments import SyntheticSpec
from .priors import PriorSpec


class PlannedCell:
    """One (synthetic spec, prior, sampler config, replicate) run of a grid."""

    def __init__(
        self,
        index: int,
        spec: SyntheticSpec,
        prior: PriorSpec,
        config: SamplerConfig,
        replicate: int = 0,
    ):
        self.index = index
        self.spec = spec
        self.prior = prior
        self.config = config
        self.replicate = replicate

    @property
    def label(self) -> str:
        return f"m={self.spec.m} K={self.config.K} {self.prior.describe()} rep={self.replicate}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "m": self.spec.m,
            "K": self.config.K,
            "prior": self.prior.to_dict(),
            "replicate": self.replicate,
            "seed": self.spec.seed,
            "iterations": self.config.iterations,
            "spec": asdict(self.spec),
        }


def plan_grid(
    specs: Sequence[SyntheticSpec],
    priors: Sequence[Tuple[PriorSpec, SamplerConfig]],
    replicates: int = 1,
) -> List[PlannedCell]:
    """Cartesian product spec x prior x replicate, in that nesting order."""
    if not specs or not priors:
        raise UsageError("a grid needs at least one spec and one prior")
    if replicates < 1:
        raise UsageError("replicates must be >= 1")
    cells: List[PlannedCell] = []
    for spec in specs:
        for prior, config in priors:
            for rep in range(replicates):
                cells.append(PlannedCell(len(cells), spec, prior, config, rep))
    return cells


def plan_pairs(
    pairs: Sequence[Tuple[SyntheticSpec, PriorSpec, SamplerConfig]],
    replicates: int = 1,
) -> List[PlannedCell]:
    """Cells for preset tables, where the prior depends on the spec."""
    if replicates < 1:
        raise UsageError("replicates must be >= 1")
    cells: List[PlannedCell] = []
    for spec, prior, config in pairs:
        for rep in range(replicates):
            cells.append(PlannedCell(len(cells), spec, prior, config, rep))
    return cells


__all__ = ["PlannedCell", "plan_grid", "plan_pairs"]
