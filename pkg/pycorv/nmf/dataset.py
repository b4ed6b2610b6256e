"""
pycorv.nmf.dataset - Count-valued ratings with train/validation/test splits

Ratings are stored as parallel arrays of (row, col, value) with a split tag
per entry. Real data comes from MovieLens-style files read with pandas;
synthetic data is drawn from the Poisson-Exponential generative model.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import ConfigError, DataError, DataParseError
from ..rng import substream

logger = logging.getLogger(__name__)

SPLIT_FRACTIONS = (0.75, 0.125, 0.125)

RATINGS_FORMATS = ("ml_tab", "csv_header")

_ML_TAB_COLUMNS = ["userId", "movieId", "rating", "timestamp"]
_HEADER_COLUMNS = ["userId", "movieId", "rating"]


class Split(IntEnum):
    TRAIN = 0
    VALIDATION = 1
    TEST = 2


@dataclass(frozen=True)
class Entries:
    """Observed cells of one split."""
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class RatingsDataset:
    n_users: int
    n_items: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    splits: np.ndarray
    # Poisson means of the generating factors, synthetic data only
    true_means: Optional[np.ndarray] = None
    metadata: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.int64)
        self.splits = np.asarray(self.splits, dtype=np.int8)
        problems = []
        n = len(self.values)
        if not (len(self.rows) == len(self.cols) == len(self.splits) == n):
            problems.append("entries: rows, cols, values and splits must have equal length")
        elif n:
            if self.rows.min() < 0 or self.rows.max() >= self.n_users:
                problems.append(f"rows: indices must lie in [0, {self.n_users})")
            if self.cols.min() < 0 or self.cols.max() >= self.n_items:
                problems.append(f"cols: indices must lie in [0, {self.n_items})")
            if self.values.min() < 0:
                problems.append("values: counts must be >= 0")
        if problems:
            raise DataError("invalid ratings dataset\n  " + "\n  ".join(problems))

    @property
    def n_entries(self) -> int:
        return len(self.values)

    def entries(self, split: Split) -> Entries:
        mask = self.splits == int(split)
        return Entries(self.rows[mask], self.cols[mask], self.values[mask])

    def noise_floor(self, split: Split = Split.TEST) -> Optional[float]:
        """RMSE of the generating means against the sampled counts."""
        if self.true_means is None:
            return None
        mask = self.splits == int(split)
        if not mask.any():
            return None
        return float(np.sqrt(np.mean((self.values[mask] - self.true_means[mask]) ** 2)))


def assign_splits(n: int, rng: np.random.Generator) -> np.ndarray:
    """Per-entry 75/12.5/12.5 split from a seeded shuffle."""
    n_train = int(round(SPLIT_FRACTIONS[0] * n))
    n_valid = int(round(SPLIT_FRACTIONS[1] * n))
    tags = np.full(n, int(Split.TEST), dtype=np.int8)
    order = rng.permutation(n)
    tags[order[:n_train]] = int(Split.TRAIN)
    tags[order[n_train:n_train + n_valid]] = int(Split.VALIDATION)
    return tags


def generate_synthetic(n_users: int, n_items: int, rank: int, rate: float = 1.0,
                       seed: int = 0, density: float = 0.5) -> RatingsDataset:
    """X_ij ~ Poisson([W* H*]_ij) on a random `density` share of the cells.

    W*, H* ~ Exponential(rate), so E[X_ij] = rank / rate^2.
    """
    problems = []
    if n_users < 1 or n_items < 1:
        problems.append(f"shape: need positive dimensions, got {n_users}x{n_items}")
    if rank < 0:
        problems.append(f"rank: must be >= 0, got {rank}")
    if not rate > 0.0:
        problems.append(f"rate: must be > 0, got {rate}")
    if not 0.0 < density <= 1.0:
        problems.append(f"density: must lie in (0, 1], got {density}")
    if problems:
        raise ConfigError("invalid synthetic dataset", problems)

    rng = substream(seed, "data")
    w_true = rng.exponential(1.0 / rate, size=(n_users, rank))
    h_true = rng.exponential(1.0 / rate, size=(rank, n_items))
    means = w_true @ h_true
    rows, cols = np.nonzero(rng.random((n_users, n_items)) < density)
    cell_means = means[rows, cols]
    values = rng.poisson(cell_means)
    dataset = RatingsDataset(
        n_users, n_items, rows, cols, values, assign_splits(len(values), rng),
        true_means=cell_means,
        metadata={"rank": rank, "rate": rate, "seed": seed, "density": density},
    )
    floor = dataset.noise_floor()
    dataset.metadata["noise_floor"] = math.nan if floor is None else floor
    logger.info(f"synthetic {n_users}x{n_items} rank {rank}: {dataset.n_entries} entries, "
                f"noise floor {dataset.metadata['noise_floor']:.4f}")
    return dataset


def _parser_line(err: Exception) -> int:
    found = re.search(r"line (\d+)", str(err))
    return int(found.group(1)) if found else 0


def _read_frame(path: Path, fmt: str) -> Tuple[pd.DataFrame, int]:
    """Raw string frame plus the file line of its first row."""
    try:
        if fmt == "ml_tab":
            frame = pd.read_csv(path, sep="\t", header=None, names=_ML_TAB_COLUMNS,
                                dtype=str, skip_blank_lines=True)
            return frame, 1
        frame = pd.read_csv(path, dtype=str, skip_blank_lines=True)
    except pd.errors.ParserError as err:
        raise DataParseError(f"malformed row in {path.name}: {err}", _parser_line(err)) from None
    except pd.errors.EmptyDataError:
        raise DataParseError(f"{path.name} is empty", 1) from None
    missing = [c for c in _HEADER_COLUMNS if c not in frame.columns]
    if missing:
        raise DataParseError(f"header is missing column(s) {', '.join(missing)}", 1)
    return frame, 2


def load_ratings_csv(path: Union[str, Path], fmt: str = "ml_tab", seed: int = 0) -> RatingsDataset:
    """Read (user, item, rating) rows; ids are reindexed to 0-based contiguous.

    Ratings are rounded half-up to counts. A repeated (user, item) pair keeps
    its last occurrence.
    """
    if fmt not in RATINGS_FORMATS:
        raise ConfigError(f"unknown ratings format {fmt!r}; expected one of {', '.join(RATINGS_FORMATS)}")
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"ratings file not found: {path}")

    frame, first_line = _read_frame(path, fmt)
    numeric = frame[_HEADER_COLUMNS].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1).to_numpy()
    ids = numeric[["userId", "movieId"]].to_numpy()
    bad |= np.any(np.isfinite(ids) & (ids != np.floor(ids)), axis=1)
    if bad.any():
        k = int(np.argmax(bad))
        raw = ",".join(str(v) for v in frame.iloc[k][_HEADER_COLUMNS])
        raise DataParseError(f"expected integer user, integer item, numeric rating; got {raw!r}",
                             first_line + k)
    ratings = numeric["rating"].to_numpy(dtype=np.float64)
    if (ratings < 0).any():
        k = int(np.argmax(ratings < 0))
        raise DataError(f"line {first_line + k}: negative rating {ratings[k]:g}")

    numeric["rating"] = np.floor(ratings + 0.5).astype(np.int64)
    dupes = numeric.duplicated(subset=["userId", "movieId"], keep="last")
    if dupes.any():
        logger.warning(f"{path.name}: {int(dupes.sum())} duplicate (user, item) rating(s), keeping the last")
        numeric = numeric[~dupes]

    rows, users = pd.factorize(numeric["userId"].astype(np.int64), sort=True)
    cols, items = pd.factorize(numeric["movieId"].astype(np.int64), sort=True)
    values = numeric["rating"].to_numpy(dtype=np.int64)
    dataset = RatingsDataset(len(users), len(items), rows, cols, values,
                             assign_splits(len(values), substream(seed, "data")))
    logger.info(f"loaded {path.name}: {dataset.n_users} users, {dataset.n_items} items, "
                f"{dataset.n_entries} ratings")
    return dataset


def write_ratings_csv(dataset: RatingsDataset, path: Union[str, Path]) -> None:
    """Headered userId,movieId,rating CSV with 0-based ids."""
    frame = pd.DataFrame({
        "userId": dataset.rows,
        "movieId": dataset.cols,
        "rating": dataset.values,
    })
    frame.to_csv(path, index=False, lineterminator="\n")
