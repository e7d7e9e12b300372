"""Synthetic low-rank experiments and the Gibbs-vs-VB comparison."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from rich.progress import Progress

from .config import SamplerConfig, VBConfig
from .errors import UsageError
from .gibbs import run_gibbs
from .logging_utils import get_logger
from .models import ObservationSet, PosteriorSummary, holdout_rmse, rmse
from .priors import DiscretePrior, FixedPrior, GammaPrior, InverseGammaPrior, PriorSpec
from .random_streams import RngStream
from .vb import VBResult, entry_moments, run_vb

if TYPE_CHECKING:
    from .planner import PlannedCell

log = get_logger("experiments")

# Substreams of a replicate's data stream.
FACTOR_STREAM, MASK_STREAM, NOISE_STREAM = 0, 1, 2
COMPARE_STREAM = 7


@dataclass(frozen=True)
class SyntheticSpec:
    """Square m x m truth of rank r, factor entries N(0, s) with s = 20 / sqrt(m) by default.

    ``factor_scale`` says whether s is read as the variance (default) or the
    standard deviation of the factor entries.
    """

    m: int = 100
    r: int = 2
    observe_fraction: float = 0.2
    noise_sd: float = 1.0
    seed: int = 0
    scale: Optional[float] = None
    factor_scale: Literal["variance", "sd"] = "variance"
    with_replacement: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise UsageError("m must be a positive integer")
        if not 1 <= self.r:
            raise UsageError("r must be a positive integer")
        if self.r > self.m:
            raise UsageError(f"rank r={self.r} exceeds m={self.m}")
        if not 0 < self.observe_fraction <= 1:
            raise UsageError("observe_fraction must lie in (0, 1]")
        if self.noise_sd < 0:
            raise UsageError("noise_sd must be nonnegative")
        if self.factor_scale not in ("variance", "sd"):
            raise UsageError("factor_scale must be 'variance' or 'sd'")
        if self.scale is not None and not self.scale > 0:
            raise UsageError("scale must be positive")

    @property
    def scale_value(self) -> float:
        return self.scale if self.scale is not None else 20.0 / math.sqrt(self.m)

    @property
    def entry_sd(self) -> float:
        s = self.scale_value
        return math.sqrt(s) if self.factor_scale == "variance" else s

    @property
    def n(self) -> int:
        return int(math.floor(self.observe_fraction * self.m * self.m + 0.5))


def generate_synthetic(spec: SyntheticSpec, rng: RngStream) -> tuple[np.ndarray, ObservationSet]:
    m, r = spec.m, spec.r
    factors = rng.fork(FACTOR_STREAM)
    M0 = factors.standard_normal((m, r)) * spec.entry_sd
    N0 = factors.standard_normal((m, r)) * spec.entry_sd
    truth = M0 @ N0.T
    n = spec.n
    mask = rng.fork(MASK_STREAM)
    if spec.with_replacement:
        rows = mask.integers(0, m, n)
        cols = mask.integers(0, m, n)
    else:
        flat = np.sort(mask.choice(m * m, size=n, replace=False))
        rows, cols = np.divmod(flat, m)
    values = truth[rows, cols]
    if spec.noise_sd > 0:
        values = values + spec.noise_sd * rng.fork(NOISE_STREAM).standard_normal(n)
    return truth, ObservationSet(m, m, rows, cols, values)


@dataclass
class ExperimentResult:
    m: int
    K: int
    r: int
    prior: str
    hyperparams: dict[str, Any]
    seed: int
    replicate: int
    rmse: float
    seconds: float
    retained_count: int
    backend: str = "gibbs"
    converged: Optional[bool] = None
    observe_fraction: float = 0.2
    noise_sd: float = 1.0
    rmse_trace: list[float] = field(default_factory=list, repr=False)

    def to_row(self) -> dict[str, Any]:
        row = {
            "m": self.m,
            "K": self.K,
            "prior": self.prior,
            "hyperparams": ";".join(f"{k}={v:g}" for k, v in self.hyperparams.items()),
            "seed": self.seed,
            "replicate": self.replicate,
            "rmse": self.rmse,
            "seconds": self.seconds,
        }
        return row

    def to_dict(self) -> dict[str, Any]:
        out = self.to_row()
        out["hyperparams"] = dict(self.hyperparams)
        out.update(
            r=self.r,
            retained_count=self.retained_count,
            backend=self.backend,
            converged=self.converged,
            observe_fraction=self.observe_fraction,
            noise_sd=self.noise_sd,
        )
        return out


def run_cell(cell: "PlannedCell") -> ExperimentResult:
    """Generate data for the cell's replicate and fit it with Gibbs."""
    spec = cell.spec
    truth, obs = generate_synthetic(spec, RngStream(spec.seed).fork(cell.replicate))
    config = replace(cell.config, chain=cell.replicate)
    started = time.perf_counter()
    summary = run_gibbs(obs, cell.prior, config, reference=truth)
    seconds = time.perf_counter() - started
    params = cell.prior.to_dict()
    kind = params.pop("kind")
    return ExperimentResult(
        m=spec.m,
        K=config.K,
        r=spec.r,
        prior=kind,
        hyperparams=params,
        seed=spec.seed,
        replicate=cell.replicate,
        rmse=rmse(summary.theta_mean, truth),
        seconds=seconds,
        retained_count=summary.retained_count,
        observe_fraction=spec.observe_fraction,
        noise_sd=spec.noise_sd,
        rmse_trace=list(summary.rmse_trace),
    )


def run_cells(
    cells: Sequence["PlannedCell"], workers: int = 1, show_progress: bool = False
) -> list[ExperimentResult]:
    """Run planned cells; results come back in plan order."""
    results: list[Optional[ExperimentResult]] = [None] * len(cells)
    with Progress(transient=True, disable=not show_progress) as progress:
        task = progress.add_task("grid", total=len(cells))
        if workers <= 1:
            for pos, cell in enumerate(cells):
                results[pos] = run_cell(cell)
                log.info("%s -> rmse %.4f", cell.label, results[pos].rmse)
                progress.advance(task)
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                futures = {executor.submit(run_cell, cell): pos for pos, cell in enumerate(cells)}
                for fut in as_completed(futures):
                    pos = futures[fut]
                    results[pos] = fut.result()
                    log.info("%s -> rmse %.4f", cells[pos].label, results[pos].rmse)
                    progress.advance(task)
    return [r for r in results if r is not None]


def run_grid(
    specs: Sequence[SyntheticSpec],
    priors: Sequence[tuple[PriorSpec, SamplerConfig]],
    replicates: int = 1,
    workers: int = 1,
    show_progress: bool = False,
) -> list[ExperimentResult]:
    from .planner import plan_grid

    return run_cells(plan_grid(specs, priors, replicates), workers, show_progress)


def results_frame(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in results])


def summarize_results(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    """Mean, sd and count of the RMSE per (m, K, prior, hyperparams) cell."""
    frame = results_frame(results)
    if frame.empty:
        return pd.DataFrame(columns=["m", "K", "prior", "hyperparams", "rmse_mean", "rmse_sd", "replicates"])
    grouped = frame.groupby(["m", "K", "prior", "hyperparams"], sort=False)["rmse"]
    summary = grouped.agg(rmse_mean="mean", rmse_sd="std", replicates="count").reset_index()
    summary["rmse_sd"] = summary["rmse_sd"].fillna(0.0)
    return summary


# --- Presets ---------------------------------------------------------------

# Best reported hyperparameters, K = 5, growing m.
GROWING_M_PRESETS: dict[int, list[PriorSpec]] = {
    100: [FixedPrior(0.2), GammaPrior.from_beta2(500), InverseGammaPrior(1, 0.015), DiscretePrior(0.11, 1, 0.05)],
    200: [FixedPrior(1), GammaPrior.from_beta2(2000), InverseGammaPrior(1, 0.012), DiscretePrior(0.08, 1, 0.05)],
    500: [FixedPrior(7), GammaPrior.from_beta2(10000), InverseGammaPrior(1, 0.005), DiscretePrior(0.05, 1, 0.05)],
    1000: [FixedPrior(10), GammaPrior.from_beta2(40000), InverseGammaPrior(1, 0.007), DiscretePrior(0.03, 1, 0.05)],
}

# m = 500, growing K.
GROWING_K_PRESETS: dict[int, list[PriorSpec]] = {
    2: [FixedPrior(1), GammaPrior.from_beta2(5000), InverseGammaPrior(1, 0.001), DiscretePrior(0.05, 1, 0.05)],
    5: [FixedPrior(7), GammaPrior.from_beta2(10000), InverseGammaPrior(1, 0.005), DiscretePrior(0.05, 1, 0.05)],
    10: [FixedPrior(6), GammaPrior.from_beta2(12500), InverseGammaPrior(1, 0.006), DiscretePrior(0.03, 1, 0.05)],
    20: [FixedPrior(6), GammaPrior.from_beta2(13000), InverseGammaPrior(1, 0.003), DiscretePrior(0.02, 1, 0.05)],
}

# Reported RMSE per prior kind, for comparison columns.
GROWING_M_REPORTED = {
    100: {"fixed": 0.75, "gamma": 0.60, "invgamma": 0.59, "discrete": 0.60},
    200: {"fixed": 0.47, "gamma": 0.37, "invgamma": 0.39, "discrete": 0.36},
    500: {"fixed": 0.27, "gamma": 0.23, "invgamma": 0.25, "discrete": 0.22},
    1000: {"fixed": 0.18, "gamma": 0.16, "invgamma": 0.18, "discrete": 0.16},
}
GROWING_K_REPORTED = {
    2: {"fixed": 0.22, "gamma": 0.22, "invgamma": 0.22, "discrete": 0.22},
    5: {"fixed": 0.27, "gamma": 0.23, "invgamma": 0.25, "discrete": 0.22},
    10: {"fixed": 0.31, "gamma": 0.23, "invgamma": 0.26, "discrete": 0.22},
    20: {"fixed": 0.37, "gamma": 0.22, "invgamma": 0.27, "discrete": 0.22},
}


def growing_m_pairs(
    ms: Sequence[int] = (100, 200, 500, 1000),
    base: Optional[SamplerConfig] = None,
    seed: int = 0,
    kinds: Optional[Sequence[str]] = None,
) -> list[tuple[SyntheticSpec, PriorSpec, SamplerConfig]]:
    config = replace(base or SamplerConfig(), K=5)
    pairs = []
    for m in ms:
        if m not in GROWING_M_PRESETS:
            raise UsageError(f"no preset for m={m}; choose from {sorted(GROWING_M_PRESETS)}")
        spec = SyntheticSpec(m=m, seed=seed)
        for prior in GROWING_M_PRESETS[m]:
            if kinds is None or prior.kind in kinds:
                pairs.append((spec, prior, config))
    return pairs


def growing_k_pairs(
    Ks: Sequence[int] = (2, 5, 10, 20),
    base: Optional[SamplerConfig] = None,
    seed: int = 0,
    m: int = 500,
    kinds: Optional[Sequence[str]] = None,
) -> list[tuple[SyntheticSpec, PriorSpec, SamplerConfig]]:
    spec = SyntheticSpec(m=m, seed=seed)
    pairs = []
    for K in Ks:
        if K not in GROWING_K_PRESETS:
            raise UsageError(f"no preset for K={K}; choose from {sorted(GROWING_K_PRESETS)}")
        config = replace(base or SamplerConfig(), K=K)
        for prior in GROWING_K_PRESETS[K]:
            if kinds is None or prior.kind in kinds:
                pairs.append((spec, prior, config))
    return pairs


# --- Backend comparison ------------------------------------------------------


@dataclass
class BackendComparison:
    gibbs_rmse: float
    vb_rmse: float
    entries: pd.DataFrame
    gibbs: PosteriorSummary
    vb: VBResult
    gibbs_draws: np.ndarray = field(repr=False, default_factory=lambda: np.empty((0, 0)))


def pick_entries(obs: ObservationSet, count: int, seed: int) -> list[tuple[int, int]]:
    if obs.n == 0:
        raise UsageError("cannot pick entries from an empty observation set")
    rng = RngStream(seed).fork(COMPARE_STREAM)
    positions = np.sort(rng.choice(obs.n, size=min(count, obs.n), replace=False))
    return [(int(obs.rows[p]), int(obs.cols[p])) for p in positions]


def compare_backends(
    train: ObservationSet,
    test: ObservationSet,
    prior: InverseGammaPrior,
    sampler_config: SamplerConfig,
    vb_config: VBConfig,
    entries: Optional[Sequence[tuple[int, int]]] = None,
    show_progress: bool = False,
) -> BackendComparison:
    """Fit both backends on ``train`` and put their per-entry posteriors side by side."""
    if not isinstance(prior, InverseGammaPrior):
        raise UsageError("the backend comparison uses the inverse-gamma prior")
    if entries is None:
        entries = pick_entries(train, 9, sampler_config.seed)
    entries = [(int(i), int(j)) for i, j in entries]
    gibbs = run_gibbs(train, prior, sampler_config, tracked_entries=entries, show_progress=show_progress)
    vb = run_vb(train, vb_config, prior, test=test)

    retained = np.asarray(gibbs.gamma_iterations, dtype=np.int64) - 1
    draws = gibbs.entry_traces[retained]
    rows = np.asarray([i for i, _ in entries], dtype=np.int64)
    cols = np.asarray([j for _, j in entries], dtype=np.int64)
    vb_mean, vb_var = entry_moments(vb.state, rows, cols)
    table = pd.DataFrame(
        {
            "i": rows,
            "j": cols,
            "gibbs_mean": draws.mean(axis=0),
            "gibbs_sd": draws.std(axis=0, ddof=1) if len(draws) > 1 else np.zeros(len(entries)),
            "gibbs_q05": np.quantile(draws, 0.05, axis=0),
            "gibbs_q50": np.quantile(draws, 0.50, axis=0),
            "gibbs_q95": np.quantile(draws, 0.95, axis=0),
            "vb_mean": vb_mean,
            "vb_sd": np.sqrt(vb_var),
        }
    )
    return BackendComparison(
        gibbs_rmse=holdout_rmse(gibbs, test),
        vb_rmse=holdout_rmse(vb.state, test),
        entries=table,
        gibbs=gibbs,
        vb=vb,
        gibbs_draws=draws,
    )


__all__ = [
    "SyntheticSpec",
    "ExperimentResult",
    "BackendComparison",
    "generate_synthetic",
    "run_cell",
    "run_cells",
    "run_grid",
    "results_frame",
    "summarize_results",
    "growing_m_pairs",
    "growing_k_pairs",
    "pick_entries",
    "compare_backends",
    "GROWING_M_PRESETS",
    "GROWING_K_PRESETS",
    "GROWING_M_REPORTED",
    "GROWING_K_REPORTED",
]
