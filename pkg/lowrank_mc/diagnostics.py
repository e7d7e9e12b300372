"""MCMC trace diagnostics: autocorrelation of tracked entries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import UsageError


@dataclass
class Autocorrelation:
    values: np.ndarray  # lags 0..max_lag
    degenerate: bool = False  # constant trace: only lag 0 is defined

    def first_lag_below(self, threshold: float) -> int | None:
        below = np.flatnonzero(np.abs(self.values[1:]) < threshold)
        return int(below[0]) + 1 if below.size else None


def acf(trace: Sequence[float], max_lag: int) -> Autocorrelation:
    """Sample autocorrelation, mean-centred and normalized by the lag-0 autocovariance."""
    x = np.asarray(trace, dtype=np.float64).ravel()
    if max_lag < 1:
        raise UsageError("max_lag must be a positive integer")
    if x.size <= max_lag:
        raise UsageError(f"trace length {x.size} must exceed max_lag {max_lag}")
    x = x - x.mean()
    c0 = float(np.dot(x, x))
    values = np.zeros(max_lag + 1)
    values[0] = 1.0
    if c0 <= 0.0:
        return Autocorrelation(values, degenerate=True)
    for k in range(1, max_lag + 1):
        values[k] = np.dot(x[:-k], x[k:]) / c0
    return Autocorrelation(values)


def select_tracked_entries(m1: int, m2: int, limit: int = 9) -> list[tuple[int, int]]:
    """Corner/centre grid of up to ``limit`` distinct cells."""
    rows = sorted({0, m1 // 2, m1 - 1})
    cols = sorted({0, m2 // 2, m2 - 1})
    cells = [(i, j) for i in rows for j in cols]
    return cells[:limit]


def acf_table(
    entry_traces: np.ndarray, entries: Sequence[tuple[int, int]], max_lag: int, start: int = 0
) -> pd.DataFrame:
    """Long table (entry, i, j, lag, value, degenerate) over traces[start:]."""
    records = []
    for col, (i, j) in enumerate(entries):
        result = acf(entry_traces[start:, col], max_lag)
        for lag, value in enumerate(result.values):
            records.append(
                {
                    "entry": col,
                    "i": int(i),
                    "j": int(j),
                    "lag": lag,
                    "value": float(value),
                    "degenerate": result.degenerate,
                }
            )
    return pd.DataFrame.from_records(
        records, columns=["entry", "i", "j", "lag", "value", "degenerate"]
    )


def lags_to_threshold(table: pd.DataFrame, threshold: float = 0.2) -> pd.Series:
    """First lag at which |acf| drops below ``threshold``, per entry (NaN if never)."""

    def first(group: pd.DataFrame) -> float:
        hit = group[(group["lag"] > 0) & (group["value"].abs() < threshold)]
        return float(hit["lag"].min()) if len(hit) else float("nan")

    return table.groupby("entry")[["lag", "value"]].apply(first)


__all__ = [
    "Autocorrelation",
    "acf",
    "select_tracked_entries",
    "acf_table",
    "lags_to_threshold",
]
