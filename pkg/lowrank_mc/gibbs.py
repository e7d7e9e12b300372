"""Block-Gibbs sampler over (M, N, gamma).

One sweep draws every row of M from its Gaussian conditional, then every
row of N, then gamma from the prior's conditional. Row draws within a block
run on a thread pool; all randomness of a block is drawn up front from the
stream forked as (chain, iteration, block), so results do not depend on
scheduling or on the number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TimeRemainingColumn

from .conditionals import Block, block_conditionals, gamma_conditional
from .config import SamplerConfig
from .diagnostics import select_tracked_entries
from .errors import NumericalError, UsageError
from .logging_utils import get_logger
from .models import FactorState, ObservationSet, PosteriorSummary, rmse
from .priors import PriorSpec
from .random_streams import RngStream, sample_mvn_batch

INIT_STREAM = 0
BLOCK_STREAMS = {"M": 0, "N": 1, "gamma": 2}

# Upper bound on per-entry K*K floats assembled at once by one task.
ENTRY_FLOAT_BUDGET = 1 << 20
MAX_ROWS_PER_TASK = 4096


def row_chunks(ptr: np.ndarray, K: int) -> list[tuple[int, int]]:
    """Greedy partition of rows into tasks bounded by entry count."""
    budget = max(1, ENTRY_FLOAT_BUDGET // (K * K))
    chunks: list[tuple[int, int]] = []
    m = len(ptr) - 1
    start = 0
    while start < m:
        stop = start + 1
        while (
            stop < m
            and stop - start < MAX_ROWS_PER_TASK
            and ptr[stop + 1] - ptr[start] <= budget
        ):
            stop += 1
        chunks.append((start, stop))
        start = stop
    return chunks


@dataclass
class GibbsRun:
    config: SamplerConfig
    prior: PriorSpec
    state: FactorState
    summary: PosteriorSummary
    weight: float
    executor: Optional[ThreadPoolExecutor] = None
    chunks: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    iteration: int = 0

    @classmethod
    def start(
        cls,
        obs: ObservationSet,
        prior: PriorSpec,
        config: SamplerConfig,
        rng: RngStream,
    ) -> "GibbsRun":
        state = init_state(obs.m1, obs.m2, config, prior, rng)
        summary = PosteriorSummary(m1=obs.m1, m2=obs.m2)
        return cls(
            config=config,
            prior=prior,
            state=state,
            summary=summary,
            weight=config.likelihood_weight(obs.n),
            chunks={
                "M": row_chunks(obs.row_ptr, config.K),
                "N": row_chunks(obs.col_ptr, config.K),
            },
        )


def init_state(
    m1: int, m2: int, config: SamplerConfig, prior: PriorSpec, rng: RngStream
) -> FactorState:
    """gamma from the prior's initial value, M and N drawn from their prior given it."""
    gamma = prior.initial_gamma(m1, m2, config.K)
    scale = np.sqrt(gamma)
    M = rng.standard_normal((m1, config.K)) * scale
    N = rng.standard_normal((m2, config.K)) * scale
    return FactorState(M, N, gamma)


def _sample_block(
    run: GibbsRun,
    obs: ObservationSet,
    block: Block,
    partner: np.ndarray,
    z: np.ndarray,
) -> np.ndarray:
    prior_precision = 1.0 / run.state.gamma
    out = np.empty_like(z)
    chunks = run.chunks.get(block) or row_chunks(
        obs.row_ptr if block == "M" else obs.col_ptr, z.shape[1]
    )

    def task(bounds: tuple[int, int]) -> None:
        start, stop = bounds
        P, h = block_conditionals(obs, block, partner, prior_precision, run.weight, start, stop)
        out[start:stop] = sample_mvn_batch(P, h, z[start:stop], block=block, offset=start)

    if run.executor is not None and len(chunks) > 1:
        # list() re-raises the first worker exception here
        list(run.executor.map(task, chunks))
    else:
        for bounds in chunks:
            task(bounds)
    return out


def gibbs_sweep(run: GibbsRun, obs: ObservationSet, rng: RngStream) -> FactorState:
    """One M -> N -> gamma sweep; ``rng`` is the iteration stream."""
    state = run.state
    m1, m2 = state.shape
    K = state.K
    z = rng.fork(BLOCK_STREAMS["M"]).standard_normal((m1, K))
    state.M = _sample_block(run, obs, "M", state.N, z)
    z = rng.fork(BLOCK_STREAMS["N"]).standard_normal((m2, K))
    state.N = _sample_block(run, obs, "N", state.M, z)
    cond = gamma_conditional(run.prior, state.M, state.N)
    state.gamma = np.asarray(cond.sample(rng.fork(BLOCK_STREAMS["gamma"])), dtype=np.float64)
    run.iteration += 1
    return state


class GibbsSampler:
    """Runs one chain and accumulates the posterior mean of theta = M N^T."""

    def __init__(
        self,
        prior: PriorSpec,
        config: SamplerConfig,
        show_progress: bool = False,
        on_iteration: Optional[Callable[[int, GibbsRun], None]] = None,
    ):
        self.prior = prior
        self.config = config
        self.show_progress = show_progress
        self.on_iteration = on_iteration
        self._log = get_logger("gibbs")
        self.last_run: Optional[GibbsRun] = None

    def run(
        self,
        obs: ObservationSet,
        reference: Optional[np.ndarray] = None,
        cells: Optional[tuple[np.ndarray, np.ndarray]] = None,
        tracked_entries: Optional[Sequence[tuple[int, int]]] = None,
    ) -> PosteriorSummary:
        cfg = self.config
        m1, m2 = obs.m1, obs.m2
        if reference is not None and np.shape(reference) != (m1, m2):
            raise UsageError(f"reference shape {np.shape(reference)} != ({m1}, {m2})")
        dense = m1 * m2 <= cfg.dense_cell_limit
        if not dense and cells is None:
            raise UsageError(
                f"{m1}x{m2} exceeds the dense limit; pass the cells to accumulate"
            )
        chain = RngStream(cfg.seed).fork(cfg.chain)
        run = GibbsRun.start(obs, self.prior, cfg, chain.fork(INIT_STREAM))
        summary = run.summary
        tracked = list(tracked_entries) if tracked_entries is not None else select_tracked_entries(m1, m2)
        summary.tracked_entries = [(int(i), int(j)) for i, j in tracked]
        tr_rows = np.asarray([i for i, _ in tracked], dtype=np.int64)
        tr_cols = np.asarray([j for _, j in tracked], dtype=np.int64)
        summary.entry_traces = np.empty((cfg.iterations, len(tracked)))

        if dense:
            theta_sum = np.zeros((m1, m2))
        else:
            cell_rows = np.asarray(cells[0], dtype=np.int64)
            cell_cols = np.asarray(cells[1], dtype=np.int64)
            summary.cells = (cell_rows, cell_cols)
            theta_sum = np.zeros(cell_rows.size)

        self._log.info(
            "Gibbs start: %dx%d, n=%d, K=%d, prior=%s, weight=%.6g, iterations=%d",
            m1, m2, obs.n, cfg.K, self.prior.describe(), run.weight, cfg.iterations,
        )
        workers = cfg.worker_count()
        progress = Progress(
            "[progress.description]{task.description}",
            BarColumn(),
            MofNCompleteColumn(),
            TimeRemainingColumn(),
            transient=True,
            disable=not self.show_progress,
        )
        try:
            with progress, ThreadPoolExecutor(max_workers=workers) as executor:
                run.executor = executor if workers > 1 else None
                task_id = progress.add_task("gibbs", total=cfg.iterations)
                for t in range(1, cfg.iterations + 1):
                    try:
                        state = gibbs_sweep(run, obs, chain.fork(t))
                    except NumericalError as e:
                        self._log.error("Numerical failure at iteration %d: %s", t, e)
                        raise
                    summary.entry_traces[t - 1] = state.predict(tr_rows, tr_cols)
                    current_rmse = None
                    if reference is not None:
                        current_rmse = rmse(state.theta(), reference)
                        summary.rmse_trace.append(current_rmse)
                    if cfg.is_retained(t):
                        if dense:
                            theta_sum += state.M @ state.N.T
                        else:
                            theta_sum += state.predict(cell_rows, cell_cols)
                        summary.gamma_trace.append(state.gamma.copy())
                        summary.gamma_iterations.append(t)
                        summary.retained_count += 1
                    if cfg.log_every and t % cfg.log_every == 0:
                        self._log.info(
                            "iter %d/%d%s gamma=[%s]",
                            t,
                            cfg.iterations,
                            f" rmse={current_rmse:.4f}" if current_rmse is not None else "",
                            ", ".join(f"{g:.3g}" for g in state.gamma),
                        )
                    if self.on_iteration is not None:
                        self.on_iteration(t, run)
                    progress.advance(task_id)
        finally:
            run.executor = None

        if summary.retained_count == 0:
            raise UsageError("no iteration retained; check burn_in and thinning")
        if dense:
            summary.theta_mean = theta_sum / summary.retained_count
        else:
            summary.cell_mean = theta_sum / summary.retained_count
        self._log.info("Gibbs done: retained %d iterations", summary.retained_count)
        self.last_run = run
        return summary


def run_gibbs(
    obs: ObservationSet,
    prior: PriorSpec,
    config: SamplerConfig,
    reference: Optional[np.ndarray] = None,
    cells: Optional[tuple[np.ndarray, np.ndarray]] = None,
    tracked_entries: Optional[Sequence[tuple[int, int]]] = None,
    show_progress: bool = False,
) -> PosteriorSummary:
    sampler = GibbsSampler(prior, config, show_progress=show_progress)
    return sampler.run(obs, reference=reference, cells=cells, tracked_entries=tracked_entries)


__all__ = [
    "GibbsRun",
    "GibbsSampler",
    "init_state",
    "gibbs_sweep",
    "run_gibbs",
    "row_chunks",
]
