from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence, Tuple, Union, runtime_checkable

import numpy as np

from .errors import UsageError

# Core data models: observations, factor state, posterior summary.


def _csr_order(keys: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Stable grouping of entry positions by key: (order, pointer)."""
    order = np.argsort(keys, kind="stable")
    counts = np.bincount(keys, minlength=size)
    ptr = np.zeros(size + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return order.astype(np.int64), ptr


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Observed (row, col, rating) triplets of an m1 x m2 matrix.

    Duplicate cells are kept as distinct terms. ``row_order[row_ptr[i]:
    row_ptr[i+1]]`` lists the entry positions of row i (same for columns).
    """

    m1: int
    m2: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    row_order: np.ndarray = field(init=False, repr=False)
    row_ptr: np.ndarray = field(init=False, repr=False)
    col_order: np.ndarray = field(init=False, repr=False)
    col_ptr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise UsageError("matrix dimensions must be positive")
        rows = np.array(self.rows, dtype=np.int64).ravel()
        cols = np.array(self.cols, dtype=np.int64).ravel()
        values = np.array(self.values, dtype=np.float64).ravel()
        if not rows.shape == cols.shape == values.shape:
            raise UsageError("rows, cols and values must have the same length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.m1):
            raise UsageError(f"row index out of range [0, {self.m1})")
        if cols.size and (cols.min() < 0 or cols.max() >= self.m2):
            raise UsageError(f"column index out of range [0, {self.m2})")
        if not np.all(np.isfinite(values)):
            raise UsageError("ratings must be finite")
        for name, arr in (("rows", rows), ("cols", cols), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        row_order, row_ptr = _csr_order(rows, self.m1)
        col_order, col_ptr = _csr_order(cols, self.m2)
        object.__setattr__(self, "row_order", row_order)
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_order", col_order)
        object.__setattr__(self, "col_ptr", col_ptr)

    @classmethod
    def from_triplets(
        cls, m1: int, m2: int, entries: Sequence[Tuple[int, int, float]]
    ) -> "ObservationSet":
        if entries:
            arr = np.asarray(entries, dtype=np.float64).reshape(-1, 3)
            return cls(m1, m2, arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2])
        return cls(m1, m2, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> "ObservationSet":
        """Every cell of ``matrix`` observed once, row-major."""
        matrix = np.asarray(matrix, dtype=np.float64)
        m1, m2 = matrix.shape
        rows, cols = np.divmod(np.arange(m1 * m2), m2)
        return cls(m1, m2, rows, cols, matrix.ravel())

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()))

    def row_index(self, i: int) -> np.ndarray:
        return self.row_order[self.row_ptr[i] : self.row_ptr[i + 1]]

    def col_index(self, j: int) -> np.ndarray:
        return self.col_order[self.col_ptr[j] : self.col_ptr[j + 1]]

    def row_counts(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def col_counts(self) -> np.ndarray:
        return np.diff(self.col_ptr)

    def subset(self, positions: np.ndarray) -> "ObservationSet":
        positions = np.asarray(positions, dtype=np.int64)
        return ObservationSet(
            self.m1, self.m2, self.rows[positions], self.cols[positions], self.values[positions]
        )

    def transpose(self) -> "ObservationSet":
        return ObservationSet(self.m2, self.m1, self.cols, self.rows, self.values)

    def shifted(self, offset: float) -> "ObservationSet":
        return ObservationSet(self.m1, self.m2, self.rows, self.cols, self.values - offset)

    def same_as(self, other: "ObservationSet") -> bool:
        return (
            self.m1 == other.m1
            and self.m2 == other.m2
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )


@runtime_checkable
class Predictor(Protocol):
    def predict(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray: ...


@dataclass
class FactorState:
    """Current point of the chain: theta = M @ N.T with column scales gamma."""

    M: np.ndarray
    N: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=np.float64)
        self.N = np.asarray(self.N, dtype=np.float64)
        self.gamma = np.asarray(self.gamma, dtype=np.float64).ravel()
        if self.M.ndim != 2 or self.N.ndim != 2:
            raise UsageError("M and N must be matrices")
        K = self.gamma.size
        if self.M.shape[1] != K or self.N.shape[1] != K:
            raise UsageError(
                f"inconsistent K: M {self.M.shape}, N {self.N.shape}, gamma ({K},)"
            )
        if not np.all(self.gamma > 0):
            raise UsageError("gamma entries must be positive")

    @property
    def K(self) -> int:
        return int(self.gamma.size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.M.shape[0], self.N.shape[0]

    def theta(self) -> np.ndarray:
        return self.M @ self.N.T

    def predict(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        return np.einsum("ij,ij->i", self.M[rows], self.N[cols])

    def copy(self) -> "FactorState":
        return FactorState(self.M.copy(), self.N.copy(), self.gamma.copy())


@dataclass
class PosteriorSummary:
    """Posterior mean of theta over retained iterations, plus traces.

    The mean is held densely (``theta_mean``) or, for large matrices, only
    on the requested ``cells`` (``cell_mean``).
    """

    m1: int
    m2: int
    theta_mean: Optional[np.ndarray] = None
    cells: Optional[tuple[np.ndarray, np.ndarray]] = None
    cell_mean: Optional[np.ndarray] = None
    gamma_trace: list[np.ndarray] = field(default_factory=list)
    gamma_iterations: list[int] = field(default_factory=list)
    rmse_trace: list[float] = field(default_factory=list)
    retained_count: int = 0
    tracked_entries: list[tuple[int, int]] = field(default_factory=list)
    entry_traces: Optional[np.ndarray] = None

    @property
    def dense(self) -> bool:
        return self.theta_mean is not None

    def predict(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.theta_mean is not None:
            return self.theta_mean[rows, cols]
        if self.cells is None or self.cell_mean is None:
            raise UsageError("posterior summary holds no mean")
        lookup = {
            (int(i), int(j)): k for k, (i, j) in enumerate(zip(*self.cells))
        }
        try:
            idx = [lookup[(int(i), int(j))] for i, j in zip(rows, cols)]
        except KeyError as e:
            raise UsageError(f"cell {e.args[0]} was not requested before the run")
        return self.cell_mean[np.asarray(idx, dtype=np.int64)]


def predict_entry(state: FactorState, i: int, j: int) -> float:
    m1, m2 = state.shape
    if not (0 <= i < m1 and 0 <= j < m2):
        raise UsageError(f"index ({i}, {j}) out of range for {m1}x{m2} matrix")
    return float(state.M[i] @ state.N[j])


def rmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape:
        raise UsageError(f"dimension mismatch: {estimate.shape} vs {truth.shape}")
    if estimate.size == 0:
        raise UsageError("rmse of empty matrices")
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def holdout_rmse(
    state_or_mean: Union[Predictor, np.ndarray],
    test: ObservationSet,
    clip: Optional[tuple[float, float]] = None,
    offset: float = 0.0,
) -> float:
    """RMSE over the test entries only.

    ``offset`` is added to every prediction (global-mean offset); ``clip``
    bounds predictions to a rating range.
    """
    if test.n == 0:
        raise UsageError("empty test set")
    if isinstance(state_or_mean, np.ndarray):
        mean = state_or_mean
        if mean.shape != (test.m1, test.m2):
            raise UsageError(f"mean shape {mean.shape} does not match test {test.m1}x{test.m2}")
        preds = mean[test.rows, test.cols]
    else:
        preds = np.asarray(state_or_mean.predict(test.rows, test.cols), dtype=np.float64)
    preds = preds + offset
    if clip is not None:
        preds = np.clip(preds, clip[0], clip[1])
    return float(np.sqrt(np.mean((preds - test.values) ** 2)))


__all__ = [
    "ObservationSet",
    "FactorState",
    "PosteriorSummary",
    "Predictor",
    "predict_entry",
    "rmse",
    "holdout_rmse",
]
