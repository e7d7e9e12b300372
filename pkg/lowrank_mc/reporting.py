from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import ConfigEncoder
from .errors import DataError
from .models import PosteriorSummary

RESULT_FILENAME = "result.json"
SCHEMA_VERSION = "1.0.0"

GAMMA_TRACE = "trace_gamma.csv"
RMSE_TRACE = "trace_rmse.csv"
ENTRY_TRACE = "trace_entries.csv"
VB_TRACE = "trace_vb.csv"
ACF_TABLE = "acf.csv"
THETA_CELLS = "theta_mean.csv"

TRACE_FORMAT = "%.17g"
TABLE_FORMAT = "%.4f"

_ENTRY_COLUMN = re.compile(r"theta_(\d+)_(\d+)$")


@dataclass
class RunReport:
    schema_version: str
    command: str
    started: str
    ended: str
    manifest: Dict[str, Any]
    metrics: Dict[str, Any]
    artifacts: List[str] = field(default_factory=list)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(asdict(self), indent=indent, cls=ConfigEncoder)

    def save(self, output_dir: Path) -> Path:
        output_dir.mkdir(parents=True, exist_ok=True)
        path = output_dir / RESULT_FILENAME
        path.write_text(self.to_json())
        return path


def build_report(
    command: str,
    manifest: Dict[str, Any],
    metrics: Dict[str, Any],
    started: datetime,
    artifacts: Sequence[Path] = (),
) -> RunReport:
    return RunReport(
        schema_version=SCHEMA_VERSION,
        command=command,
        started=started.isoformat(),
        ended=datetime.now(timezone.utc).isoformat(),
        manifest=manifest,
        metrics=metrics,
        artifacts=sorted(Path(a).name for a in artifacts),
    )


def load_report(output_dir: Path) -> Dict[str, Any]:
    path = output_dir / RESULT_FILENAME
    if not path.exists():
        raise DataError(f"no {RESULT_FILENAME} in {output_dir}")
    return json.loads(path.read_text())


# --- Traces ------------------------------------------------------------------


def write_gamma_trace(summary: PosteriorSummary, output_dir: Path) -> Path:
    gammas = np.asarray(summary.gamma_trace)
    K = gammas.shape[1] if gammas.ndim == 2 else 0
    frame = pd.DataFrame(gammas.reshape(len(summary.gamma_trace), K), columns=[f"gamma_{k + 1}" for k in range(K)])
    frame.insert(0, "iteration", summary.gamma_iterations)
    path = output_dir / GAMMA_TRACE
    frame.to_csv(path, index=False, float_format=TRACE_FORMAT)
    return path


def write_rmse_trace(rmse_trace: Sequence[float], output_dir: Path) -> Path:
    frame = pd.DataFrame({"iteration": np.arange(1, len(rmse_trace) + 1), "rmse": rmse_trace})
    path = output_dir / RMSE_TRACE
    frame.to_csv(path, index=False, float_format=TRACE_FORMAT)
    return path


def write_entry_traces(summary: PosteriorSummary, output_dir: Path) -> Path:
    traces = summary.entry_traces if summary.entry_traces is not None else np.empty((0, 0))
    columns = [f"theta_{i}_{j}" for i, j in summary.tracked_entries]
    frame = pd.DataFrame(traces, columns=columns)
    frame.insert(0, "iteration", np.arange(1, len(frame) + 1))
    path = output_dir / ENTRY_TRACE
    frame.to_csv(path, index=False, float_format=TRACE_FORMAT)
    return path


def read_entry_traces(output_dir: Path) -> tuple[np.ndarray, list[tuple[int, int]]]:
    path = output_dir / ENTRY_TRACE
    if not path.exists():
        raise DataError(f"no {ENTRY_TRACE} in {output_dir}")
    frame = pd.read_csv(path, float_precision="round_trip")
    entries = []
    for name in frame.columns[1:]:
        match = _ENTRY_COLUMN.match(name)
        if match is None:
            raise DataError(f"unexpected column {name!r} in {path}")
        entries.append((int(match.group(1)), int(match.group(2))))
    return frame.iloc[:, 1:].to_numpy(dtype=np.float64), entries


def read_rmse_trace(output_dir: Path) -> Optional[np.ndarray]:
    path = output_dir / RMSE_TRACE
    if not path.exists():
        return None
    return pd.read_csv(path, float_precision="round_trip")["rmse"].to_numpy()


def write_vb_trace(deltas: Sequence[float], test_rmse: Sequence[float], output_dir: Path) -> Path:
    frame = pd.DataFrame({"iteration": np.arange(1, len(deltas) + 1), "delta": deltas})
    if len(test_rmse) == len(deltas):
        frame["test_rmse"] = test_rmse
    path = output_dir / VB_TRACE
    frame.to_csv(path, index=False, float_format=TRACE_FORMAT)
    return path


def write_acf(table: pd.DataFrame, output_dir: Path) -> Path:
    path = output_dir / ACF_TABLE
    table.to_csv(path, index=False, float_format=TRACE_FORMAT)
    return path


def write_theta_cells(
    rows: np.ndarray, cols: np.ndarray, values: np.ndarray, output_dir: Path
) -> Path:
    frame = pd.DataFrame({"i": rows, "j": cols, "value": values})
    path = output_dir / THETA_CELLS
    frame.to_csv(path, index=False, float_format=TRACE_FORMAT)
    return path


# --- Grid tables ---------------------------------------------------------------


def write_grid_results(
    results_rows: List[Dict[str, Any]],
    results_json: List[Dict[str, Any]],
    summary: pd.DataFrame,
    output_dir: Path,
) -> List[Path]:
    output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = output_dir / "results.csv"
    pd.DataFrame(results_rows).to_csv(csv_path, index=False, float_format=TRACE_FORMAT)
    json_path = output_dir / "results.json"
    json_path.write_text(json.dumps(results_json, indent=2, cls=ConfigEncoder))
    summary_path = output_dir / "summary.csv"
    summary.to_csv(summary_path, index=False, float_format=TABLE_FORMAT)
    return [csv_path, json_path, summary_path]


# --- Model artifacts -----------------------------------------------------------

MODEL_FILENAME = "model.npz"


@dataclass
class SavedModel:
    """Fitted predictions: a dense posterior mean, VB factor means, or the mean on a set of cells.

    Cells outside a sparse mean predict 0, the prior mean.
    """

    offset: float = 0.0
    theta_mean: Optional[np.ndarray] = None
    m_rows: Optional[np.ndarray] = None
    n_rows: Optional[np.ndarray] = None
    clip: Optional[tuple[float, float]] = None
    cell_rows: Optional[np.ndarray] = None
    cell_cols: Optional[np.ndarray] = None
    cell_values: Optional[np.ndarray] = None
    cell_shape: Optional[tuple[int, int]] = None

    @classmethod
    def from_cells(
        cls,
        shape: tuple[int, int],
        rows: np.ndarray,
        cols: np.ndarray,
        values: np.ndarray,
        offset: float = 0.0,
        clip: Optional[tuple[float, float]] = None,
    ) -> "SavedModel":
        """Deduplicated and sorted by flat index; repeated cells share one mean."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        keys, first = np.unique(rows * shape[1] + cols, return_index=True)
        return cls(
            offset=offset,
            clip=clip,
            cell_rows=keys // shape[1],
            cell_cols=keys % shape[1],
            cell_values=np.asarray(values, dtype=np.float64)[first],
            cell_shape=(int(shape[0]), int(shape[1])),
        )

    @property
    def shape(self) -> tuple[int, int]:
        if self.theta_mean is not None:
            return self.theta_mean.shape
        if self.cell_shape is not None:
            return self.cell_shape
        return self.m_rows.shape[0], self.n_rows.shape[0]

    def predict(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Without the offset; ``holdout_rmse`` adds it."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.theta_mean is not None:
            return self.theta_mean[rows, cols]
        if self.cell_shape is not None:
            return self._predict_cells(rows, cols)
        return np.einsum("ek,ek->e", self.m_rows[rows], self.n_rows[cols])

    def _predict_cells(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        width = self.cell_shape[1]
        keys = self.cell_rows * width + self.cell_cols
        query = rows * width + cols
        pos = np.minimum(np.searchsorted(keys, query), max(len(keys) - 1, 0))
        out = np.zeros(len(query))
        if len(keys):
            hit = keys[pos] == query
            out[hit] = self.cell_values[pos[hit]]
        return out

    def save(self, output_dir: Path) -> Path:
        arrays: Dict[str, np.ndarray] = {"offset": np.asarray(self.offset)}
        if self.theta_mean is not None:
            arrays["theta_mean"] = self.theta_mean
        elif self.cell_shape is not None:
            arrays.update(
                cell_rows=self.cell_rows,
                cell_cols=self.cell_cols,
                cell_values=self.cell_values,
                cell_shape=np.asarray(self.cell_shape, dtype=np.int64),
            )
        else:
            arrays["m_rows"] = self.m_rows
            arrays["n_rows"] = self.n_rows
        if self.clip is not None:
            arrays["clip"] = np.asarray(self.clip, dtype=np.float64)
        path = output_dir / MODEL_FILENAME
        np.savez(path, **arrays)
        return path

    @classmethod
    def load(cls, output_dir: Path) -> "SavedModel":
        path = output_dir / MODEL_FILENAME
        if not path.exists():
            raise DataError(f"no {MODEL_FILENAME} in {output_dir}")
        with np.load(path) as data:
            offset = float(data["offset"])
            clip = tuple(float(c) for c in data["clip"]) if "clip" in data else None
            if "theta_mean" in data:
                return cls(offset=offset, theta_mean=data["theta_mean"], clip=clip)
            if "cell_values" in data:
                m1, m2 = (int(d) for d in data["cell_shape"])
                return cls(
                    offset=offset,
                    clip=clip,
                    cell_rows=data["cell_rows"],
                    cell_cols=data["cell_cols"],
                    cell_values=data["cell_values"],
                    cell_shape=(m1, m2),
                )
            if "m_rows" in data and "n_rows" in data:
                return cls(offset=offset, m_rows=data["m_rows"], n_rows=data["n_rows"], clip=clip)
        raise DataError(f"{path} holds no posterior mean, cell means or factor means")


__all__ = [
    "RunReport",
    "build_report",
    "load_report",
    "write_gamma_trace",
    "write_rmse_trace",
    "write_entry_traces",
    "read_entry_traces",
    "read_rmse_trace",
    "write_vb_trace",
    "write_acf",
    "write_theta_cells",
    "write_grid_results",
    "SavedModel",
    "MODEL_FILENAME",
    "RESULT_FILENAME",
    "SCHEMA_VERSION",
]
