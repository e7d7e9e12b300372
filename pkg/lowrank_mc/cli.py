"""Command-line entry point: ``lowrank-mc <command>``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.table import Table

from .conditionals import verify_marginal_prior
from .config import SamplerConfig, VBConfig, load_config_values
from .datasets import (
    IdMaps,
    RatingsFileFormat,
    parse_ratings,
    read_ratings_frame,
    train_test_split,
    write_ratings,
)
from .diagnostics import acf_table, lags_to_threshold
from .errors import DataError, LowRankError, NumericalError, UsageError
from .experiments import (
    SyntheticSpec,
    compare_backends,
    generate_synthetic,
    growing_k_pairs,
    growing_m_pairs,
    run_cells,
    summarize_results,
    GROWING_K_REPORTED,
    GROWING_M_REPORTED,
)
from .gibbs import run_gibbs
from .logging_utils import get_logger, set_level
from .manifest import RunManifest
from .models import holdout_rmse, rmse
from .planner import plan_grid, plan_pairs
from .priors import (
    DiscretePrior,
    FixedPrior,
    GammaPrior,
    InverseGammaPrior,
    PriorSpec,
)
from .random_streams import RngStream
from .reporting import (
    SavedModel,
    build_report,
    load_report,
    read_entry_traces,
    read_rmse_trace,
    write_acf,
    write_entry_traces,
    write_gamma_trace,
    write_grid_results,
    write_rmse_trace,
    write_theta_cells,
    write_vb_trace,
)
from .vb import run_vb

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
MARGINAL_PRIOR_TOLERANCE = 1e-6

log = get_logger("cli")
console = Console()
err_console = Console(stderr=True)


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage as UsageError instead of exiting with 2."""

    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


# --- Argument groups -----------------------------------------------------------


def _prior_parent() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("prior")
    g.add_argument("--prior", choices=["fixed", "invgamma", "gamma", "discrete"], default="invgamma")
    g.add_argument("--gamma0", type=float, default=1.0, help="fixed prior value")
    g.add_argument("--a", type=float, default=1.0, help="inverse-gamma shape")
    g.add_argument("--b", type=float, default=0.1, help="inverse-gamma rate")
    g.add_argument("--beta", type=float, default=None, help="gamma prior beta")
    g.add_argument("--beta2", type=float, default=None, help="gamma prior beta^2")
    g.add_argument("--epsilon", type=float, default=0.05, help="discrete prior spike")
    g.add_argument("--C", type=float, default=1.0, help="discrete prior slab")
    g.add_argument("--p", type=float, default=0.05, help="discrete prior slab probability")
    return p


def _sampler_parent(default_K: int) -> argparse.ArgumentParser:
    """Unset flags fall back to ``--config``, then to the config dataclass defaults."""
    p = _Parser(add_help=False)
    g = p.add_argument_group("sampler")
    g.add_argument("--config", type=Path, default=None, help="JSON file of sampler and VB settings")
    g.add_argument("--K", type=int, default=None)
    g.add_argument("--iterations", type=int, default=None)
    g.add_argument("--burn-in", type=int, default=None)
    g.add_argument("--thinning", type=int, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--lambda", dest="lambda_", type=float, default=None, help="inverse temperature")
    g.add_argument("--noise-sd", type=float, default=None)
    g.add_argument("--threads", type=int, default=None)
    g.add_argument("--tol", type=float, default=None, help="VB tolerance")
    g.add_argument("--max-iter", type=int, default=None, help="VB iteration cap")
    g.add_argument("--progress", action="store_true", help="show a progress bar")
    g.add_argument("--out", type=Path, default=Path("runs"))
    p.set_defaults(default_K=default_K)
    return p


# sampler flags that fall back to the config values
_CONFIG_FLAGS = ("K", "iterations", "burn_in", "thinning", "seed", "lambda_", "noise_sd", "threads", "tol", "max_iter")


def apply_config(args: argparse.Namespace) -> None:
    """Fill unset sampler flags from the config values."""
    if not hasattr(args, "default_K"):
        return
    args.config_values = load_config_values(args.config, args.default_K)
    for dest in _CONFIG_FLAGS:
        if getattr(args, dest) is None:
            setattr(args, dest, args.config_values[dest])


def prior_from_args(args: argparse.Namespace) -> PriorSpec:
    if args.prior == "fixed":
        return FixedPrior(args.gamma0)
    if args.prior == "invgamma":
        return InverseGammaPrior(args.a, args.b)
    if args.prior == "gamma":
        if args.beta is not None and args.beta2 is not None:
            raise UsageError("give either --beta or --beta2, not both")
        if args.beta2 is not None:
            return GammaPrior.from_beta2(args.beta2)
        return GammaPrior(args.beta if args.beta is not None else 1.0)
    return DiscretePrior(args.epsilon, args.C, args.p)


def _flag_values(args: argparse.Namespace) -> dict[str, Any]:
    values = dict(getattr(args, "config_values", {}))
    values.update({dest: getattr(args, dest) for dest in _CONFIG_FLAGS})
    return values


def sampler_from_args(args: argparse.Namespace) -> SamplerConfig:
    return SamplerConfig.from_dict(_flag_values(args))


def vb_from_args(args: argparse.Namespace) -> VBConfig:
    return VBConfig.from_dict(_flag_values(args))


def _require_invgamma(prior: PriorSpec) -> InverseGammaPrior:
    if not isinstance(prior, InverseGammaPrior):
        raise UsageError("the vb backend supports --prior invgamma only")
    return prior


def _print_metrics(title: str, metrics: dict[str, Any]) -> None:
    table = Table(title=title, show_header=False)
    for key, value in metrics.items():
        table.add_row(key, f"{value:.4f}" if isinstance(value, float) else str(value))
    console.print(table)


# --- Commands --------------------------------------------------------------------


def _load_simulate_manifest(args: argparse.Namespace) -> RunManifest:
    if args.manifest is not None:
        manifest = RunManifest.load(args.manifest)
        if manifest.command != "simulate" or manifest.synthetic is None:
            raise UsageError(f"{args.manifest} is not a simulate manifest")
        if args.out_given:
            manifest.output_dir = str(args.out)
        return manifest
    spec = SyntheticSpec(
        m=args.m,
        r=args.r,
        observe_fraction=args.observe_fraction,
        noise_sd=args.noise_sd,
        seed=args.seed,
        factor_scale=args.factor_scale,
        with_replacement=not args.without_replacement,
    )
    prior = prior_from_args(args)
    if args.backend == "vb":
        _require_invgamma(prior)
    return RunManifest(
        command="simulate",
        prior=prior.to_dict(),
        backend=args.backend,
        synthetic=asdict(spec),
        seed=args.seed,
        output_dir=str(args.out),
        sampler=sampler_from_args(args).to_dict(),
        vb=vb_from_args(args).to_dict(),
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    manifest = _load_simulate_manifest(args)
    prior = manifest.prior_spec()
    spec = SyntheticSpec(**manifest.synthetic)
    out = Path(manifest.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth, obs = generate_synthetic(spec, RngStream(spec.seed).fork(0))
    artifacts: list[Path] = []
    metrics: dict[str, Any] = {"m": spec.m, "n": obs.n}
    if manifest.backend == "gibbs":
        config = manifest.sampler_config()
        summary = run_gibbs(obs, prior, config, reference=truth, show_progress=args.progress)
        metrics.update(K=config.K, rmse=rmse(summary.theta_mean, truth), retained_count=summary.retained_count)
        artifacts += [
            write_gamma_trace(summary, out),
            write_rmse_trace(summary.rmse_trace, out),
            write_entry_traces(summary, out),
        ]
    else:
        vb_config = manifest.vb_config()
        result = run_vb(obs, vb_config, _require_invgamma(prior))
        metrics.update(
            K=vb_config.K,
            rmse=rmse(result.state.theta(), truth),
            converged=result.converged,
            iterations=result.iterations,
        )
        artifacts.append(write_vb_trace(result.deltas, result.test_rmse_trace, out))
    artifacts.append(manifest.save())
    report = build_report("simulate", manifest.to_dict(), metrics, started, artifacts)
    report.save(out)
    _print_metrics(f"simulate m={spec.m} {prior.describe()}", metrics)
    return EXIT_OK


def _load_fit_manifest(args: argparse.Namespace) -> tuple[RunManifest, PriorSpec]:
    if args.manifest is not None:
        manifest = RunManifest.load(args.manifest)
        if manifest.command != "fit" or manifest.dataset is None:
            raise UsageError(f"{args.manifest} is not a fit manifest")
        if args.out_given:
            manifest.output_dir = str(args.out)
        if args.clip:
            manifest.clip = list(args.clip)
        return manifest, manifest.prior_spec()
    if args.data is None:
        raise UsageError("fit needs --data or --manifest")
    prior = prior_from_args(args)
    fmt = RatingsFileFormat.guess(args.data) if args.format is None else RatingsFileFormat.from_name(args.format)
    manifest = RunManifest(
        command="fit",
        prior=prior.to_dict(),
        backend=args.backend,
        dataset={"path": str(args.data), "format": fmt.value},
        split_ratio=args.split,
        seed=args.seed,
        output_dir=str(args.out),
        offset=args.offset,
        clip=list(args.clip) if args.clip else None,
        sampler=sampler_from_args(args).to_dict(),
        vb=vb_from_args(args).to_dict(),
    )
    return manifest, prior


def cmd_fit(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    manifest, prior = _load_fit_manifest(args)
    out = Path(manifest.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    obs, maps = parse_ratings(Path(manifest.dataset["path"]), manifest.dataset["format"])
    train, test = train_test_split(obs, manifest.split_ratio or 0.8, manifest.seed)
    offset = float(train.values.mean()) if manifest.offset and train.n else 0.0
    fit_obs = train.shifted(offset) if offset else train
    clip = tuple(manifest.clip) if manifest.clip else None

    artifacts: list[Path] = []
    metrics: dict[str, Any] = {
        "n": obs.n,
        "n_train": train.n,
        "n_test": test.n,
        "users": obs.m1,
        "items": obs.m2,
        "offset": offset,
    }
    if manifest.backend == "gibbs":
        config = manifest.sampler_config()
        dense = obs.m1 * obs.m2 <= config.dense_cell_limit
        # too large for a dense mean: accumulate the held-out cells only
        cells = None if dense else (test.rows, test.cols)
        summary = run_gibbs(fit_obs, prior, config, cells=cells, show_progress=args.progress)
        metrics["retained_count"] = summary.retained_count
        artifacts += [write_gamma_trace(summary, out), write_entry_traces(summary, out)]
        if dense:
            model = SavedModel(offset=offset, theta_mean=summary.theta_mean, clip=clip)
        else:
            model = SavedModel.from_cells((obs.m1, obs.m2), test.rows, test.cols, summary.cell_mean, offset, clip)
            artifacts.append(write_theta_cells(test.rows, test.cols, summary.cell_mean, out))
    else:
        vb_config = manifest.vb_config()
        test_fit = test.shifted(offset) if offset else test
        result = run_vb(fit_obs, vb_config, _require_invgamma(prior), test=test_fit)
        model = SavedModel(offset=offset, m_rows=result.state.m_rows, n_rows=result.state.n_rows, clip=clip)
        metrics.update(converged=result.converged, iterations=result.iterations)
        artifacts.append(write_vb_trace(result.deltas, result.test_rmse_trace, out))
    metrics["heldout_rmse"] = holdout_rmse(model, test, clip=clip, offset=offset) if test.n else float("nan")

    artifacts.append(model.save(out))
    maps_path = out / "id_maps.json"
    maps.save(maps_path)
    artifacts.append(maps_path)
    artifacts.append(write_ratings(test, maps, out / "test_ratings.csv", RatingsFileFormat.CSV_HEADER))
    artifacts.append(manifest.save())
    build_report("fit", manifest.to_dict(), metrics, started, artifacts).save(out)
    _print_metrics(f"fit {manifest.backend} {prior.describe()}", metrics)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    model_dir: Path = args.model_dir
    model = SavedModel.load(model_dir)
    maps = IdMaps.load(model_dir / "id_maps.json")
    if maps.shape != model.shape:
        raise DataError(f"id maps {maps.shape} do not match model {model.shape}")
    test_path = args.test if args.test is not None else model_dir / "test_ratings.csv"
    fmt = RatingsFileFormat.guess(test_path) if args.format is None else RatingsFileFormat.from_name(args.format)
    frame = read_ratings_frame(test_path, fmt)
    rows = maps.user_index(frame["user"].to_numpy())
    cols = maps.item_index(frame["item"].to_numpy())
    known = (rows >= 0) & (cols >= 0)
    preds = np.zeros(len(frame))
    if known.any():
        preds[known] = model.predict(rows[known], cols[known])
    preds += model.offset
    if model.clip is not None:
        preds = np.clip(preds, *model.clip)
    errors = preds - frame["rating"].to_numpy()
    metrics = {
        "rmse": float(np.sqrt(np.mean(errors**2))),
        "n": int(len(frame)),
        "unseen": int((~known).sum()),
    }
    out = args.out if args.out is not None else model_dir / "evaluate"
    manifest = {"command": "evaluate", "model_dir": str(model_dir), "test": str(test_path), "format": fmt.value}
    build_report("evaluate", manifest, metrics, started).save(out)
    _print_metrics("evaluate", metrics)
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    run_dir: Path = args.run_dir
    traces, entries = read_entry_traces(run_dir)
    burn_in = args.burn_in
    max_lag = args.max_lag
    if burn_in is None or max_lag is None:
        sampler = load_report(run_dir).get("manifest", {}).get("sampler", {})
        burn_in = sampler.get("burn_in", 0) if burn_in is None else burn_in
        max_lag = sampler.get("max_lag", 20) if max_lag is None else max_lag
    table = acf_table(traces, entries, max_lag, start=burn_in)
    write_acf(table, run_dir)
    lags = lags_to_threshold(table, args.threshold)

    view = Table(title=f"ACF below {args.threshold} (burn-in {burn_in})")
    view.add_column("entry")
    view.add_column("cell")
    view.add_column("first lag")
    for k, (i, j) in enumerate(entries):
        lag = lags.get(k, float("nan"))
        view.add_row(str(k), f"({i}, {j})", "never" if np.isnan(lag) else str(int(lag)))
    console.print(view)

    if args.plots:
        from .plotting import plot_acf, plot_rmse_trace

        plot_acf(table, run_dir / "acf.png", args.threshold)
        rmse_trace = read_rmse_trace(run_dir)
        if rmse_trace is not None and len(rmse_trace):
            plot_rmse_trace(rmse_trace, run_dir / "rmse_trace.png", burn_in)
    return EXIT_OK


def cmd_verify_marginal_prior(args: argparse.Namespace) -> int:
    table = verify_marginal_prior(args.S, args.beta)
    view = Table(title="Mixing integral vs exp(-beta sqrt(S))")
    for col in ("S", "beta", "ratio", "constant", "rel_error"):
        view.add_column(col)
    for row in table.itertuples():
        view.add_row(f"{row.S:g}", f"{row.beta:g}", f"{row.ratio:.12g}", f"{row.constant:.12g}", f"{row.rel_error:.2e}")
    console.print(view)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.out / "marginal_prior.csv", index=False, float_format="%.17g")
    worst = float(table["rel_error"].max())
    if worst >= MARGINAL_PRIOR_TOLERANCE:
        err_console.print(f"[bold red]relative error {worst:.2e} exceeds {MARGINAL_PRIOR_TOLERANCE:g}[/bold red]")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_grid(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    base = sampler_from_args(args)
    kinds = args.priors
    if args.study == "growing-m":
        cells = plan_pairs(growing_m_pairs(args.m or (100, 200, 500, 1000), base, args.seed, kinds), args.replicates)
        reported = {(m, 5): v for m, v in GROWING_M_REPORTED.items()}
    elif args.study == "growing-K":
        cells = plan_pairs(growing_k_pairs(args.K_values or (2, 5, 10, 20), base, args.seed, kinds=kinds), args.replicates)
        reported = {(500, K): v for K, v in GROWING_K_REPORTED.items()}
    else:
        specs = [SyntheticSpec(m=m, seed=args.seed) for m in (args.m or [100])]
        priors = [(prior_from_args(args), replace(base, K=K)) for K in (args.K_values or [base.K])]
        cells = plan_grid(specs, priors, args.replicates)
        reported = {}

    if args.dry_run:
        view = Table(title=f"{len(cells)} planned cells")
        for col in ("#", "m", "K", "prior", "replicate"):
            view.add_column(col)
        for cell in cells:
            view.add_row(str(cell.index), str(cell.spec.m), str(cell.config.K), cell.prior.describe(), str(cell.replicate))
        console.print(view)
        return EXIT_OK

    results = run_cells(cells, workers=args.workers, show_progress=args.progress)
    summary = summarize_results(results)
    if reported:
        summary["reported"] = [
            reported.get((int(m), int(K)), {}).get(kind, np.nan)
            for m, K, kind in zip(summary["m"], summary["K"], summary["prior"])
        ]
    out: Path = args.out
    artifacts = write_grid_results([r.to_row() for r in results], [r.to_dict() for r in results], summary, out)
    manifest = {
        "command": "grid",
        "study": args.study,
        "replicates": args.replicates,
        "sampler": base.to_dict(),
        "cells": [c.to_dict() for c in cells],
    }
    build_report("grid", manifest, {"cells": len(cells)}, started, artifacts).save(out)

    view = Table(title=f"{args.study} RMSE")
    for col in summary.columns:
        view.add_column(str(col))
    for row in summary.itertuples(index=False):
        view.add_row(*[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row])
    console.print(view)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    prior = InverseGammaPrior(args.a, args.b)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.data is not None:
        obs, _ = parse_ratings(args.data, args.format)
    else:
        _, obs = generate_synthetic(SyntheticSpec(m=args.m, seed=args.seed), RngStream(args.seed).fork(0))
    train, test = train_test_split(obs, args.split, args.seed)
    comparison = compare_backends(
        train, test, prior, sampler_from_args(args), vb_from_args(args), show_progress=args.progress
    )
    entries_path = out / "entries.csv"
    comparison.entries.to_csv(entries_path, index=False, float_format="%.17g")
    metrics = {
        "gibbs_rmse": comparison.gibbs_rmse,
        "vb_rmse": comparison.vb_rmse,
        "vb_converged": comparison.vb.converged,
        "vb_iterations": comparison.vb.iterations,
    }
    artifacts = [entries_path, write_vb_trace(comparison.vb.deltas, comparison.vb.test_rmse_trace, out)]
    if args.plots:
        from .plotting import plot_entry_comparison, plot_vb_convergence

        artifacts.append(plot_entry_comparison(comparison.gibbs_draws, comparison.entries, out / "entries.png"))
        artifacts.append(plot_vb_convergence(comparison.vb.deltas, out / "vb_convergence.png", comparison.vb.test_rmse_trace))
    manifest = {
        "command": "compare",
        "prior": prior.to_dict(),
        "data": str(args.data) if args.data else None,
        "split_ratio": args.split,
        "seed": args.seed,
    }
    build_report("compare", manifest, metrics, started, artifacts).save(out)
    _print_metrics("Gibbs vs VB", metrics)
    return EXIT_OK


# --- Parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lowrank-mc", description="Bayesian low-rank matrix completion")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    prior = _prior_parent()

    p = sub.add_parser("simulate", parents=[prior, _sampler_parent(5)], help="synthetic data, fit, RMSE vs truth")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--observe-fraction", type=float, default=0.2)
    p.add_argument("--factor-scale", choices=["variance", "sd"], default="variance")
    p.add_argument("--without-replacement", action="store_true")
    p.add_argument("--backend", choices=["gibbs", "vb"], default="gibbs")
    p.add_argument("--manifest", type=Path, default=None, help="replay a saved simulate manifest")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("fit", parents=[prior, _sampler_parent(10)], help="fit a ratings file")
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--format", choices=[f.value for f in RatingsFileFormat], default=None)
    p.add_argument("--backend", choices=["gibbs", "vb"], default="gibbs")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--offset", action="store_true", help="fit around the global training mean")
    p.add_argument("--clip", type=float, nargs=2, metavar=("LO", "HI"), default=None)
    p.add_argument("--manifest", type=Path, default=None, help="rerun from a saved manifest")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("evaluate", help="held-out RMSE of saved artifacts")
    p.add_argument("--model-dir", type=Path, required=True)
    p.add_argument("--test", type=Path, default=None)
    p.add_argument("--format", choices=[f.value for f in RatingsFileFormat], default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("diagnose", help="ACF table and plots from saved traces")
    p.add_argument("--run-dir", type=Path, required=True)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--max-lag", type=int, default=None)
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(handler=cmd_diagnose)

    p = sub.add_parser(
        "verify-prop1", aliases=["verify-marginal-prior"], help="quadrature check of the gamma-prior marginal"
    )
    p.add_argument("--S", type=float, nargs="+", default=[0.1, 1.0, 4.0, 10.0, 100.0])
    p.add_argument("--beta", type=float, nargs="+", default=[0.5, 1.0, 5.0])
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(handler=cmd_verify_marginal_prior)

    p = sub.add_parser("grid", parents=[prior, _sampler_parent(5)], help="synthetic studies with replicates")
    p.add_argument("--study", choices=["growing-m", "growing-K", "custom"], default="growing-m")
    p.add_argument("--m", type=int, nargs="+", default=None)
    p.add_argument("--K-values", type=int, nargs="+", default=None)
    p.add_argument("--priors", nargs="+", choices=["fixed", "invgamma", "gamma", "discrete"], default=None)
    p.add_argument("--replicates", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(handler=cmd_grid)

    p = sub.add_parser("compare", parents=[_sampler_parent(10)], help="Gibbs vs VB under the inverse-gamma prior")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.1)
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--format", choices=[f.value for f in RatingsFileFormat], default=None)
    p.add_argument("--m", type=int, default=100, help="synthetic size when --data is absent")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        args.out_given = "--out" in argv
        apply_config(args)
        if args.verbose:
            set_level("DEBUG")
        elif args.quiet:
            set_level("WARNING")
        handler: Callable[[argparse.Namespace], int] = args.handler
        return handler(args)
    except UsageError as e:
        err_console.print(f"[bold red]Usage error:[/bold red] {e}")
        return EXIT_USAGE
    except DataError as e:
        err_console.print(f"[bold red]Data error:[/bold red] {e}")
        return EXIT_DATA
    except NumericalError as e:
        err_console.print(f"[bold red]Numerical failure:[/bold red] {e}")
        return EXIT_NUMERICAL
    except LowRankError as e:
        err_console.print(f"[bold red]Error:[/bold red] {e}")
        return EXIT_USAGE


__all__ = ["main", "build_parser", "prior_from_args", "sampler_from_args", "vb_from_args"]
