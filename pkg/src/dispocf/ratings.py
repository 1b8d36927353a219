"""Rating data model: ingestion, summary statistics, fold splitting, filtering.

A :class:`Dataset` is an immutable, array-backed collection of
``(user, item, rating)`` triples.  Users and items get dense integer indices in
first-seen order so that runs are bit-reproducible for a given input file.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np
from scipy import sparse

__all__ = [
    "RATING_GRID",
    "Rating",
    "Dataset",
    "DatasetError",
    "RatingsFormatError",
    "StatsSummary",
    "FoldAssignment",
    "parse_ratings_csv",
    "write_ratings_csv",
    "dataset_stats",
    "split_folds",
    "filter_by_users",
    "min_ratings_filter",
    "write_folds_csv",
    "save_dataset",
    "load_dataset",
]

RATING_GRID = tuple(x / 2 for x in range(1, 11))
CSV_HEADER = ("userId", "movieId", "rating", "timestamp")
NO_TIMESTAMP = -1


class DatasetError(ValueError):
    """Invalid dataset contents or arguments."""


class RatingsFormatError(DatasetError):
    """A ratings file could not be parsed.  ``line`` is 1-based (header = 1)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Rating:
    user_id: str
    item_id: str
    value: float
    timestamp: int | None = None


def _on_grid(values: np.ndarray) -> np.ndarray:
    doubled = values * 2.0
    return (doubled == np.round(doubled)) & (values >= 0.5) & (values <= 5.0)


def _first_seen_codes(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Factorize ``labels`` keeping first-appearance order.

    Returns ``(uniques, codes)`` with ``uniques[codes] == labels``.
    """
    if len(labels) == 0:
        return labels[:0], np.zeros(0, dtype=np.int64)
    uniq, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return uniq[order], rank[inverse.ravel()].astype(np.int64)


def _as_str_array(ids: Sequence) -> np.ndarray:
    if isinstance(ids, np.ndarray) and ids.dtype.kind == "U":
        return ids
    return np.asarray([str(x) for x in ids], dtype=str) if len(ids) else np.zeros(0, dtype=str)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Dataset:
    """Immutable collection of ratings with dense user/item indices.

    Parameters
    ----------
    users, items : sequences of identifiers, one per rating
    values : ratings on the half-star grid 0.5 .. 5.0
    timestamps : optional seconds-since-epoch, ``-1`` or ``None`` for missing

    Identifiers are stored as strings.
    """

    __slots__ = (
        "user_ids", "item_ids", "user_index", "item_index",
        "user_codes", "item_codes", "values", "timestamps",
        "global_mean", "per_user_mean", "per_item_mean",
        "user_counts", "item_counts", "__weakref__", "_csr_cache",
    )

    def __init__(self, users: Sequence, items: Sequence, values: Sequence[float],
                 timestamps: Sequence[int | None] | None = None):
        users = _as_str_array(users)
        items = _as_str_array(items)
        user_ids, ucodes = _first_seen_codes(users)
        item_ids, icodes = _first_seen_codes(items)
        self._init_from_codes(user_ids, item_ids, ucodes, icodes, values, timestamps)

    @classmethod
    def from_codes(cls, user_ids: Sequence[str], item_ids: Sequence[str],
                   user_codes: np.ndarray, item_codes: np.ndarray,
                   values: np.ndarray, timestamps: np.ndarray | None = None) -> "Dataset":
        """Build directly from index arrays.  Indices are re-densified in first-seen order."""
        user_codes = np.asarray(user_codes, dtype=np.int64)
        item_codes = np.asarray(item_codes, dtype=np.int64)
        used_u, ucodes = _first_seen_codes(user_codes)
        used_i, icodes = _first_seen_codes(item_codes)
        user_ids = np.asarray(user_ids, dtype=str)[used_u] if len(used_u) else np.zeros(0, dtype=str)
        item_ids = np.asarray(item_ids, dtype=str)[used_i] if len(used_i) else np.zeros(0, dtype=str)
        self = cls.__new__(cls)
        self._init_from_codes(user_ids, item_ids, ucodes, icodes, values, timestamps)
        return self

    def _init_from_codes(self, user_ids, item_ids, ucodes, icodes, values, timestamps):
        values = np.asarray(values, dtype=np.float64)
        n = len(values)
        if not (len(ucodes) == len(icodes) == n):
            raise DatasetError("users, items and values must have equal length")
        if timestamps is None:
            ts = np.full(n, NO_TIMESTAMP, dtype=np.int64)
        else:
            ts = np.asarray([NO_TIMESTAMP if t is None else t for t in timestamps], dtype=np.int64) \
                if not isinstance(timestamps, np.ndarray) else timestamps.astype(np.int64, copy=True)
            if len(ts) != n:
                raise DatasetError("timestamps must match ratings length")
        bad = ~_on_grid(values)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise DatasetError(f"rating {values[k]!r} at row {k} is not on the half-star grid")
        n_users, n_items = len(user_ids), len(item_ids)
        if n:
            keys = ucodes * max(n_items, 1) + icodes
            uniq, counts = np.unique(keys, return_counts=True)
            if (counts > 1).any():
                dup = uniq[counts > 1][0]
                raise DatasetError(
                    f"duplicate rating for user {user_ids[dup // max(n_items, 1)]!r}, "
                    f"item {item_ids[dup % max(n_items, 1)]!r}")

        self.user_ids = tuple(str(u) for u in user_ids)
        self.item_ids = tuple(str(i) for i in item_ids)
        self.user_index = {u: k for k, u in enumerate(self.user_ids)}
        self.item_index = {i: k for k, i in enumerate(self.item_ids)}
        self.user_codes = _readonly(np.asarray(ucodes, dtype=np.int64).copy())
        self.item_codes = _readonly(np.asarray(icodes, dtype=np.int64).copy())
        self.values = _readonly(values.copy())
        self.timestamps = _readonly(ts)
        self.user_counts = _readonly(np.bincount(self.user_codes, minlength=n_users))
        self.item_counts = _readonly(np.bincount(self.item_codes, minlength=n_items))
        self.global_mean = float(values.mean()) if n else math.nan
        with np.errstate(invalid="ignore", divide="ignore"):
            self.per_user_mean = _readonly(
                np.bincount(self.user_codes, weights=values, minlength=n_users) / self.user_counts)
            self.per_item_mean = _readonly(
                np.bincount(self.item_codes, weights=values, minlength=n_items) / self.item_counts)
        self._csr_cache = {}

    def __setattr__(self, name, value):
        if name != "_csr_cache" and hasattr(self, "_csr_cache"):
            raise AttributeError("Dataset is immutable")
        object.__setattr__(self, name, value)

    # -- container protocol ------------------------------------------------

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[Rating]:
        for u, i, v, t in zip(self.user_codes, self.item_codes, self.values, self.timestamps):
            yield Rating(self.user_ids[u], self.item_ids[i], float(v),
                         None if t == NO_TIMESTAMP else int(t))

    def __getitem__(self, k: int) -> Rating:
        t = int(self.timestamps[k])
        return Rating(self.user_ids[self.user_codes[k]], self.item_ids[self.item_codes[k]],
                      float(self.values[k]), None if t == NO_TIMESTAMP else t)

    @property
    def ratings(self) -> list[Rating]:
        return list(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.user_ids == other.user_ids and self.item_ids == other.item_ids
                and np.array_equal(self.user_codes, other.user_codes)
                and np.array_equal(self.item_codes, other.item_codes)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.timestamps, other.timestamps))

    __hash__ = None

    def __repr__(self) -> str:
        return f"Dataset({len(self)} ratings, {self.n_users} users, {self.n_items} items)"

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def subset(self, mask_or_index: np.ndarray) -> "Dataset":
        """Ratings selected by a boolean mask or index array, order preserved."""
        sel = np.asarray(mask_or_index)
        if sel.dtype == bool:
            sel = np.flatnonzero(sel)
        return Dataset.from_codes(self.user_ids, self.item_ids, self.user_codes[sel],
                                  self.item_codes[sel], self.values[sel], self.timestamps[sel])

    def user_ratings(self, user_id: str) -> np.ndarray:
        return self.values[self.user_codes == self.user_index[user_id]]

    def csr(self, axis: str = "user") -> sparse.csr_matrix:
        """Sparse rating matrix with rows on ``axis`` ("user" or "item"), sorted indices."""
        if axis not in self._csr_cache:
            if axis == "user":
                rows, cols, shape = self.user_codes, self.item_codes, (self.n_users, self.n_items)
            elif axis == "item":
                rows, cols, shape = self.item_codes, self.user_codes, (self.n_items, self.n_users)
            else:
                raise ValueError(f"unknown axis {axis!r}")
            m = sparse.csr_matrix((self.values, (rows, cols)), shape=shape)
            m.sort_indices()
            self._csr_cache[axis] = m
        return self._csr_cache[axis]


# -- ingestion -------------------------------------------------------------

def parse_ratings_csv(stream: TextIO | str) -> Dataset:
    """Parse ``userId,movieId,rating,timestamp`` CSV text into a :class:`Dataset`.

    Lines starting with ``#`` before the header are skipped.

    Raises :class:`RatingsFormatError` naming the offending line for malformed
    rows, off-grid ratings and duplicate ``(user, item)`` pairs.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    header = next(reader, None)
    while header is not None and header and header[0].startswith("#"):
        header = next(reader, None)
    if header is None:
        raise RatingsFormatError("no ratings")
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise RatingsFormatError(f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}", 1)

    users: list[str] = []
    items: list[str] = []
    values: list[float] = []
    stamps: list[int] = []
    seen: dict[tuple[str, str], int] = {}
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) not in (3, 4):
            raise RatingsFormatError(f"expected 4 fields, got {len(row)}", line)
        u, i, r = row[0].strip(), row[1].strip(), row[2].strip()
        if not u or not i:
            raise RatingsFormatError("empty user or item id", line)
        try:
            v = float(r)
        except ValueError:
            raise RatingsFormatError(f"rating {r!r} is not a number", line) from None
        if not (0.5 <= v <= 5.0 and v * 2 == round(v * 2)):
            raise RatingsFormatError(f"rating {r!r} is not on the half-star grid 0.5..5.0", line)
        t = row[3].strip() if len(row) == 4 else ""
        try:
            ts = int(t) if t else NO_TIMESTAMP
        except ValueError:
            raise RatingsFormatError(f"timestamp {t!r} is not an integer", line) from None
        key = (u, i)
        if key in seen:
            raise RatingsFormatError(
                f"duplicate rating for user {u!r}, item {i!r} (first at line {seen[key]})", line)
        seen[key] = line
        users.append(u)
        items.append(i)
        values.append(v)
        stamps.append(ts)
    if not values:
        raise RatingsFormatError("no ratings")
    return Dataset(users, items, np.asarray(values), np.asarray(stamps, dtype=np.int64))


def write_ratings_csv(ds: Dataset, stream: TextIO) -> None:
    """Inverse of :func:`parse_ratings_csv`; ratings rendered with one decimal."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for u, i, v, t in zip(ds.user_codes, ds.item_codes, ds.values, ds.timestamps):
        w.writerow((ds.user_ids[u], ds.item_ids[i], f"{v:.1f}", "" if t == NO_TIMESTAMP else int(t)))


# -- statistics ------------------------------------------------------------

@dataclass(frozen=True)
class StatsSummary:
    n_ratings: int
    n_users: int
    n_items: int
    global_mean: float
    median: float
    min_user_ratings: int
    median_user_ratings: float
    max_user_ratings: int
    user_count_quantiles: dict[str, float]

    def describe(self) -> str:
        return (f"{self.n_users} users, {self.n_items} items, {self.n_ratings} ratings\n"
                f"mean rating {self.global_mean:.4f}, median rating {self.median:.1f}\n"
                f"ratings per user: min {self.min_user_ratings}, "
                f"median {self.median_user_ratings:g}, max {self.max_user_ratings}")


def lower_median(values: np.ndarray) -> float:
    """Median with the lower-of-two rule for even counts."""
    s = np.sort(np.asarray(values))
    return float(s[(len(s) - 1) // 2])


def dataset_stats(ds: Dataset) -> StatsSummary:
    if len(ds) == 0:
        raise DatasetError("dataset is empty")
    counts = ds.user_counts
    qs = {f"q{int(q * 100):02d}": float(np.quantile(counts, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9)}
    return StatsSummary(
        n_ratings=len(ds),
        n_users=ds.n_users,
        n_items=ds.n_items,
        global_mean=ds.global_mean,
        median=lower_median(ds.values),
        min_user_ratings=int(counts.min()),
        median_user_ratings=float(np.median(counts)),
        max_user_ratings=int(counts.max()),
        user_count_quantiles=qs,
    )


# -- folds -----------------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: np.ndarray
    seed: int

    def test_mask(self, fold: int) -> np.ndarray:
        return self.assignment == fold

    def train_mask(self, fold: int) -> np.ndarray:
        return self.assignment != fold

    def __iter__(self) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
        """Yield ``(fold, train_index, test_index)``."""
        for f in range(self.k):
            yield f, np.flatnonzero(self.assignment != f), np.flatnonzero(self.assignment == f)


def split_folds(ds: Dataset, k: int, seed: int) -> FoldAssignment:
    """Per-user stratified k-fold assignment.

    Each user's ratings are put in a canonical order (by raw item id), shuffled
    with the seeded RNG and dealt round-robin into the folds starting from a
    random fold.  Users are visited in raw-id order, so the result depends only
    on the per-user rating sets, not on row order of the input.
    """
    if k < 2:
        raise DatasetError(f"fold count must be >= 2, got {k}")
    if len(ds) == 0:
        raise DatasetError("dataset is empty")
    rng = np.random.default_rng(seed)
    item_ids = np.asarray(ds.item_ids)
    user_ids = np.asarray(ds.user_ids)
    # group rows by user (raw id order), items by raw id within a user
    order = np.lexsort((item_ids[ds.item_codes], user_ids[ds.user_codes]))
    users_sorted = ds.user_codes[order]
    bounds = np.flatnonzero(np.diff(users_sorted)) + 1
    assignment = np.empty(len(ds), dtype=np.int64)
    for rows in np.split(order, bounds):
        n = len(rows)
        perm = rng.permutation(n)
        start = int(rng.integers(k))
        assignment[rows[perm]] = (start + np.arange(n)) % k
    return FoldAssignment(k=k, assignment=_readonly(assignment), seed=seed)


def write_folds_csv(folds: FoldAssignment, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("ratingIndex", "fold"))
    for idx, f in enumerate(folds.assignment):
        w.writerow((idx, int(f)))


# -- filtering -------------------------------------------------------------

def filter_by_users(ds: Dataset, users: Iterable[str]) -> Dataset:
    users = set(users)
    unknown = users.difference(ds.user_index)
    if unknown:
        raise DatasetError(f"unknown users: {sorted(unknown)[:5]}")
    keep = np.zeros(ds.n_users, dtype=bool)
    keep[[ds.user_index[u] for u in users]] = True
    return ds.subset(keep[ds.user_codes])


def min_ratings_filter(ds: Dataset, min_ratings: int) -> Dataset:
    """Drop users with fewer than ``min_ratings`` ratings."""
    if min_ratings <= 1:
        return ds
    keep = ds.user_counts >= min_ratings
    return ds.subset(keep[ds.user_codes])


# -- binary cache ----------------------------------------------------------

DATASET_FORMAT = "dispocf-dataset"
DATASET_VERSION = 1


def save_dataset(ds: Dataset, path) -> None:
    """Write ``ds`` as a version-tagged ``.npz`` archive."""
    with open(path, "wb") as fh:
        np.savez(fh, format=np.array(DATASET_FORMAT), version=np.array(DATASET_VERSION),
                 user_ids=np.array(ds.user_ids, dtype=str), item_ids=np.array(ds.item_ids, dtype=str),
                 user_codes=ds.user_codes, item_codes=ds.item_codes, values=ds.values,
                 timestamps=ds.timestamps)


def load_dataset(path) -> Dataset:
    with np.load(path, allow_pickle=False) as z:
        if "format" not in z.files or str(z["format"]) != DATASET_FORMAT:
            raise DatasetError(f"{path}: not a dataset cache file")
        if int(z["version"]) != DATASET_VERSION:
            raise DatasetError(f"{path}: unsupported dataset version {int(z['version'])}")
        return Dataset.from_codes(z["user_ids"], z["item_ids"], z["user_codes"], z["item_codes"],
                                  z["values"], z["timestamps"])
