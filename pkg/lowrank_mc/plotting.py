"""Diagnostic figures. Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from scipy import stats  # noqa: E402

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def new_figure(width: float = 6.0, nrows: int = 1, ncols: int = 1):
    return plt.subplots(nrows=nrows, ncols=ncols, figsize=(width, width * GOLDEN))


def save_figure(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_rmse_trace(rmse_trace: Sequence[float], path: Path, burn_in: Optional[int] = None) -> Path:
    fig, ax = new_figure()
    ax.plot(np.arange(1, len(rmse_trace) + 1), rmse_trace, lw=1.0)
    if burn_in:
        ax.axvline(burn_in, color="grey", ls="--", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("RMSE")
    return save_figure(fig, path)


def plot_acf(table: pd.DataFrame, path: Path, threshold: float = 0.2) -> Path:
    """One stem line per tracked entry, from an ``acf_table`` frame."""
    entries = sorted(table["entry"].unique())
    ncols = min(3, len(entries)) or 1
    nrows = int(np.ceil(len(entries) / ncols)) or 1
    fig, axes = new_figure(width=3.0 * ncols, nrows=nrows, ncols=ncols)
    axes = np.atleast_1d(axes).ravel()
    for ax, entry in zip(axes, entries):
        part = table[table["entry"] == entry]
        ax.vlines(part["lag"], 0.0, part["value"], lw=1.5)
        ax.axhline(threshold, color="grey", ls=":", lw=0.8)
        ax.axhline(-threshold, color="grey", ls=":", lw=0.8)
        ax.set_ylim(-0.5, 1.05)
        ax.set_title(f"theta[{part['i'].iloc[0]}, {part['j'].iloc[0]}]", fontsize=8)
    for ax in axes[len(entries):]:
        ax.axis("off")
    return save_figure(fig, path)


def plot_vb_convergence(
    deltas: Sequence[float], path: Path, test_rmse: Optional[Sequence[float]] = None
) -> Path:
    fig, ax = new_figure()
    it = np.arange(1, len(deltas) + 1)
    ax.semilogy(it, np.maximum(deltas, 1e-300), label="max change")
    ax.set_xlabel("iteration")
    ax.set_ylabel("max change of predicted entries")
    if test_rmse:
        twin = ax.twinx()
        twin.plot(it[: len(test_rmse)], test_rmse, color="tab:red", label="test RMSE")
        twin.set_ylabel("test RMSE")
    return save_figure(fig, path)


def plot_entry_comparison(
    draws: np.ndarray, entries: pd.DataFrame, path: Path, bins: int = 30
) -> Path:
    """Gibbs histograms against the VB Gaussian for each compared entry."""
    n = len(entries)
    ncols = min(3, n) or 1
    nrows = int(np.ceil(n / ncols)) or 1
    fig, axes = new_figure(width=3.0 * ncols, nrows=nrows, ncols=ncols)
    axes = np.atleast_1d(axes).ravel()
    for k, ax in enumerate(axes[:n]):
        row = entries.iloc[k]
        ax.hist(draws[:, k], bins=bins, density=True, alpha=0.5, label="Gibbs")
        sd = max(float(row["vb_sd"]), 1e-12)
        grid = np.linspace(min(draws[:, k].min(), row["vb_mean"] - 4 * sd), max(draws[:, k].max(), row["vb_mean"] + 4 * sd), 200)
        ax.plot(grid, stats.norm.pdf(grid, loc=row["vb_mean"], scale=sd), color="tab:red", label="VB")
        ax.set_title(f"theta[{int(row['i'])}, {int(row['j'])}]", fontsize=8)
    for ax in axes[n:]:
        ax.axis("off")
    axes[0].legend(fontsize=7)
    return save_figure(fig, path)


__all__ = [
    "plot_rmse_trace",
    "plot_acf",
    "plot_vb_convergence",
    "plot_entry_comparison",
]
