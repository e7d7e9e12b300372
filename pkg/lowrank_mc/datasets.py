"""MovieLens ratings ingestion, id reindexing and train/test splitting."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .errors import DataError, ParseError, UsageError
from .logging_utils import get_logger
from .models import ObservationSet
from .random_streams import RngStream

log = get_logger("datasets")

SPLIT_STREAM = 11
COLUMNS = ["user", "item", "rating", "timestamp"]
CSV_HEADER = ["userId", "movieId", "rating", "timestamp"]


class RatingsFileFormat(str, Enum):
    TAB = "tab"  # u.data: user<TAB>item<TAB>rating<TAB>timestamp
    DOUBLE_COLON = "colon"  # ratings.dat: user::item::rating::timestamp
    CSV_HEADER = "csv"  # ratings.csv with a userId,movieId,rating,timestamp header

    @property
    def separator(self) -> str:
        return {"tab": "\t", "colon": "::", "csv": ","}[self.value]

    @classmethod
    def from_name(cls, name: Union[str, "RatingsFileFormat"]) -> "RatingsFileFormat":
        if isinstance(name, cls):
            return name
        aliases = {"tab": cls.TAB, "tsv": cls.TAB, "colon": cls.DOUBLE_COLON, "dat": cls.DOUBLE_COLON, "csv": cls.CSV_HEADER}
        try:
            return aliases[str(name).lower()]
        except KeyError:
            raise UsageError(f"unknown ratings format {name!r}; expected tab, colon or csv")

    @classmethod
    def guess(cls, path: Path) -> "RatingsFileFormat":
        suffix = path.suffix.lower()
        if suffix == ".dat":
            return cls.DOUBLE_COLON
        if suffix == ".csv":
            return cls.CSV_HEADER
        return cls.TAB


@dataclass
class IdMaps:
    """Zero-based index <-> raw id, both sorted ascending."""

    users: np.ndarray
    items: np.ndarray

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self._user_index = {int(u): k for k, u in enumerate(self.users)}
        self._item_index = {int(v): k for k, v in enumerate(self.items)}

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.users), len(self.items)

    def user_index(self, raw: np.ndarray) -> np.ndarray:
        """Indices of raw user ids, -1 for ids never seen."""
        return np.asarray([self._user_index.get(int(u), -1) for u in np.ravel(raw)], dtype=np.int64)

    def item_index(self, raw: np.ndarray) -> np.ndarray:
        return np.asarray([self._item_index.get(int(v), -1) for v in np.ravel(raw)], dtype=np.int64)

    def to_dict(self) -> dict:
        return {"users": self.users.tolist(), "items": self.items.tolist()}

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: Path) -> "IdMaps":
        if not path.exists():
            raise DataError(f"id map file not found: {path}")
        try:
            data = json.loads(path.read_text())
            return cls(users=data["users"], items=data["items"])
        except (ValueError, KeyError) as e:
            raise DataError(f"corrupted id map file {path}: {e}")


def _line_at(path: Path, line_number: int) -> str:
    with open(path, "r", errors="replace") as f:
        for k, line in enumerate(f, start=1):
            if k == line_number:
                return line.rstrip("\n")
    return ""


def read_ratings_frame(path: Path, fmt: Union[str, RatingsFileFormat]) -> pd.DataFrame:
    """Validated frame (user, item, rating, timestamp, line) in file order."""
    fmt = RatingsFileFormat.from_name(fmt)
    path = Path(path)
    if not path.exists():
        raise DataError(f"ratings file not found: {path}")
    if path.stat().st_size == 0:
        raise UsageError(f"ratings file is empty: {path}")
    header_lines = 1 if fmt is RatingsFileFormat.CSV_HEADER else 0
    try:
        frame = pd.read_csv(
            path,
            sep=fmt.separator,
            header=0 if header_lines else None,
            names=None if header_lines else COLUMNS,
            index_col=False,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            engine="python",
        )
    except pd.errors.EmptyDataError:
        raise UsageError(f"ratings file is empty: {path}")
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line_number = int(match.group(1)) if match else 0
        raise ParseError(line_number, _line_at(path, line_number), "wrong number of fields")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}")

    if header_lines:
        missing = [c for c in CSV_HEADER[:3] if c not in frame.columns]
        if missing:
            raise ParseError(1, _line_at(path, 1), f"header lacks {', '.join(missing)}")
        frame = frame.rename(columns=dict(zip(CSV_HEADER, COLUMNS)))
        if "timestamp" not in frame.columns:
            frame["timestamp"] = ""
        frame = frame[COLUMNS]

    frame = frame.fillna("")
    frame["line"] = np.arange(len(frame)) + 1 + header_lines
    blank = (frame[COLUMNS] == "").all(axis=1)
    frame = frame[~blank].reset_index(drop=True)
    if frame.empty:
        raise UsageError(f"ratings file holds no ratings: {path}")

    users = pd.to_numeric(frame["user"].str.strip(), errors="coerce")
    items = pd.to_numeric(frame["item"].str.strip(), errors="coerce")
    ratings = pd.to_numeric(frame["rating"].str.strip(), errors="coerce")
    bad_id = ~(
        users.notna() & items.notna() & (users > 0) & (items > 0)
        & (users == users.round()) & (items == items.round())
    )
    bad_rating = ~np.isfinite(ratings.to_numpy(dtype=np.float64, na_value=np.nan))
    for mask, reason in ((bad_id, "user/item ids must be positive integers"), (bad_rating, "rating is not a finite number")):
        if mask.any():
            row = frame[mask].iloc[0]
            raise ParseError(int(row["line"]), _line_at(path, int(row["line"])), reason)

    timestamps = pd.to_numeric(frame["timestamp"].str.strip(), errors="coerce").fillna(0)
    return pd.DataFrame(
        {
            "user": users.astype(np.int64),
            "item": items.astype(np.int64),
            "rating": ratings.astype(np.float64),
            "timestamp": timestamps.astype(np.int64),
            "line": frame["line"].astype(np.int64),
        }
    )


def parse_ratings(
    path: Path, fmt: Union[str, RatingsFileFormat, None] = None
) -> tuple[ObservationSet, IdMaps]:
    """Ratings file -> ObservationSet over dense zero-based user/item indices."""
    path = Path(path)
    fmt = RatingsFileFormat.guess(path) if fmt is None else RatingsFileFormat.from_name(fmt)
    frame = read_ratings_frame(path, fmt)
    rows, users = pd.factorize(frame["user"], sort=True)
    cols, items = pd.factorize(frame["item"], sort=True)
    maps = IdMaps(users=np.asarray(users), items=np.asarray(items))
    obs = ObservationSet(len(users), len(items), rows, cols, frame["rating"].to_numpy())
    log.info("Parsed %s: %d ratings, %d users, %d items", path.name, obs.n, obs.m1, obs.m2)
    return obs, maps


def observations_from_raw(
    frame: pd.DataFrame, maps: IdMaps
) -> tuple[ObservationSet, np.ndarray]:
    """Map raw-id ratings through ``maps``; unseen ids are returned as a mask, not entries."""
    rows = maps.user_index(frame["user"].to_numpy())
    cols = maps.item_index(frame["item"].to_numpy())
    known = (rows >= 0) & (cols >= 0)
    m1, m2 = maps.shape
    obs = ObservationSet(m1, m2, rows[known], cols[known], frame["rating"].to_numpy()[known])
    return obs, known


def train_test_split(
    obs: ObservationSet, ratio: float, seed: int
) -> tuple[ObservationSet, ObservationSet]:
    """Uniform per-rating split; |train| = round(ratio * n), positions kept in file order."""
    if not 0 < ratio < 1:
        raise UsageError("split ratio must lie in (0, 1)")
    if obs.n < 2:
        raise UsageError("need at least two ratings to split")
    n_train = int(math.floor(ratio * obs.n + 0.5))
    perm = RngStream(seed).fork(SPLIT_STREAM).permutation(obs.n)
    train_pos = np.sort(perm[:n_train])
    test_pos = np.sort(perm[n_train:])
    return obs.subset(train_pos), obs.subset(test_pos)


def write_ratings(
    obs: ObservationSet,
    maps: IdMaps,
    path: Path,
    fmt: Union[str, RatingsFileFormat] = RatingsFileFormat.CSV_HEADER,
    timestamps: Optional[np.ndarray] = None,
) -> Path:
    """Write with the original ids; ratings at 17 significant digits."""
    fmt = RatingsFileFormat.from_name(fmt)
    if maps.shape != (obs.m1, obs.m2):
        raise UsageError(f"id maps {maps.shape} do not match observations {obs.m1}x{obs.m2}")
    stamps = np.zeros(obs.n, dtype=np.int64) if timestamps is None else np.asarray(timestamps, dtype=np.int64)
    sep = fmt.separator
    lines = [sep.join(CSV_HEADER)] if fmt is RatingsFileFormat.CSV_HEADER else []
    users = maps.users[obs.rows]
    items = maps.items[obs.cols]
    lines.extend(
        f"{u}{sep}{v}{sep}{y:.17g}{sep}{t}" for u, v, y, t in zip(users, items, obs.values, stamps)
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


__all__ = [
    "RatingsFileFormat",
    "IdMaps",
    "read_ratings_frame",
    "parse_ratings",
    "observations_from_raw",
    "train_test_split",
    "write_ratings",
]
