"""Per-user rating-disposition statistics and population partitioning.

A rating is *negative* when it is at most 3.0 stars and *positive* when it is
at least 3.5; the half-star grid has nothing in between.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .ratings import Dataset, DatasetError

__all__ = [
    "NEGATIVE_MAX",
    "POSITIVE_MIN",
    "Bucket",
    "Optimism",
    "DispositionProfile",
    "SchemeVariant",
    "PartitionScheme",
    "Partition",
    "negative_fraction",
    "assign_bucket",
    "classify_optimism",
    "positive_peak",
    "extreme_positive_ratio",
    "profile_users",
    "partition_users",
    "write_profiles_csv",
    "bucket_histogram",
    "extreme_ratio_histogram",
    "rating_histogram",
]

NEGATIVE_MAX = 3.0
POSITIVE_MIN = 3.5
PEAKS = (3.5, 4.0, 4.5, 5.0)
DEFAULT_THRESHOLD = 0.30


class Bucket(str, enum.Enum):
    B0_10 = "0-10%"
    B10_30 = "10-30%"
    B30_50 = "30-50%"
    B50_70 = "50-70%"
    B70_90 = "70-90%"
    B90_100 = "90-100%"


# upper-inclusive: [0, .1], (.1, .3], (.3, .5], ...
_BUCKET_UPPER = (0.10, 0.30, 0.50, 0.70, 0.90, 1.0)
_BUCKETS = tuple(Bucket)


class Optimism(str, enum.Enum):
    OPTIMISTIC = "optimistic"
    PESSIMISTIC = "pessimistic"


@dataclass(frozen=True)
class DispositionProfile:
    user_id: str
    n_ratings: int
    negative_fraction: float
    bucket: Bucket
    optimism: Optimism
    positive_peak: float | None
    extreme_positive_ratio: float | None


def _check_fraction(f: float) -> None:
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"fraction {f!r} outside [0, 1]")


def negative_fraction(ratings: Sequence[float]) -> float:
    r = np.asarray(ratings, dtype=float)
    if r.size == 0:
        raise ValueError("negative_fraction of an empty rating list")
    return int(np.count_nonzero(r <= NEGATIVE_MAX)) / r.size


def assign_bucket(f: float) -> Bucket:
    _check_fraction(f)
    for upper, b in zip(_BUCKET_UPPER, _BUCKETS):
        if f <= upper:
            return b
    return Bucket.B90_100  # unreachable after the range check


def classify_optimism(f: float, threshold: float = DEFAULT_THRESHOLD) -> Optimism:
    _check_fraction(f)
    return Optimism.OPTIMISTIC if f <= threshold else Optimism.PESSIMISTIC


def positive_peak(ratings: Sequence[float]) -> float | None:
    """Most frequent positive half-star; ties go to the lower value."""
    r = np.asarray(ratings, dtype=float)
    counts = [int(np.count_nonzero(r == p)) for p in PEAKS]
    if max(counts) == 0:
        return None
    return PEAKS[counts.index(max(counts))]


def extreme_positive_ratio(ratings: Sequence[float]) -> float | None:
    r = np.asarray(ratings, dtype=float)
    n_pos = int(np.count_nonzero(r >= POSITIVE_MIN))
    if n_pos == 0:
        return None
    return int(np.count_nonzero(r >= 4.5)) / n_pos


def profile_users(ds: Dataset, threshold: float = DEFAULT_THRESHOLD) -> list[DispositionProfile]:
    """One profile per user (dataset user-index order), over the full history."""
    if len(ds) == 0:
        raise DatasetError("dataset is empty")
    n_users = ds.n_users
    codes = ds.user_codes
    n = ds.user_counts
    neg = np.bincount(codes, weights=ds.values <= NEGATIVE_MAX, minlength=n_users).astype(np.int64)
    pos = np.bincount(codes, weights=ds.values >= POSITIVE_MIN, minlength=n_users).astype(np.int64)
    ext = np.bincount(codes, weights=ds.values >= 4.5, minlength=n_users).astype(np.int64)
    peak_counts = np.stack([np.bincount(codes, weights=ds.values == p, minlength=n_users)
                            for p in PEAKS], axis=1)
    peak_idx = np.argmax(peak_counts, axis=1)  # first maximum -> lower half-star
    out = []
    for u in range(n_users):
        f = int(neg[u]) / int(n[u])
        out.append(DispositionProfile(
            user_id=ds.user_ids[u],
            n_ratings=int(n[u]),
            negative_fraction=f,
            bucket=assign_bucket(f),
            optimism=classify_optimism(f, threshold),
            positive_peak=PEAKS[peak_idx[u]] if pos[u] else None,
            extreme_positive_ratio=int(ext[u]) / int(pos[u]) if pos[u] else None,
        ))
    return out


# -- partitioning ----------------------------------------------------------

class SchemeVariant(str, enum.Enum):
    BINARY = "binary"
    NEG_BUCKET = "neg-bucket"
    POSITIVE_PEAK = "pos-peak"
    IDENTITY = "identity"


@dataclass(frozen=True)
class PartitionScheme:
    """How to split users into groups.

    ``threshold`` is the optimistic/pessimistic cut used by the binary and
    positive-peak variants.  ``separate_no_positive`` puts pessimistic users
    without any positive rating into their own group instead of the 3.5 group.
    """

    variant: SchemeVariant = SchemeVariant.BINARY
    threshold: float = DEFAULT_THRESHOLD
    separate_no_positive: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", SchemeVariant(self.variant))
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")


NO_POSITIVE_GROUP = "pessimistic no positive"


def peak_label(p: float) -> str:
    return f"pessimistic peak@{p:.1f}"


@dataclass(frozen=True)
class Partition:
    scheme: PartitionScheme
    groups: tuple[tuple[str, frozenset[str]], ...]
    notes: tuple[str, ...] = ()

    def labels(self) -> list[str]:
        return [g for g, _ in self.groups]

    def __getitem__(self, label: str) -> frozenset[str]:
        for g, members in self.groups:
            if g == label:
                return members
        raise KeyError(label)

    def sizes(self) -> dict[str, int]:
        return {g: len(m) for g, m in self.groups}


def partition_users(profiles: Sequence[DispositionProfile], scheme: PartitionScheme) -> Partition:
    if not profiles:
        raise ValueError("no profiles to partition")
    variant = scheme.variant
    notes: list[str] = []

    def optimistic(p: DispositionProfile) -> bool:
        return p.negative_fraction <= scheme.threshold

    if variant is SchemeVariant.IDENTITY:
        groups = {"all users": [p.user_id for p in profiles]}
    elif variant is SchemeVariant.BINARY:
        groups = {"optimistic": [], "pessimistic": []}
        for p in profiles:
            groups["optimistic" if optimistic(p) else "pessimistic"].append(p.user_id)
    elif variant is SchemeVariant.NEG_BUCKET:
        groups = {b.value: [] for b in Bucket}
        for p in profiles:
            groups[p.bucket.value].append(p.user_id)
    elif variant is SchemeVariant.POSITIVE_PEAK:
        groups = {"optimistic": [], **{peak_label(x): [] for x in PEAKS}}
        if scheme.separate_no_positive:
            groups[NO_POSITIVE_GROUP] = []
        folded = 0
        for p in profiles:
            if optimistic(p):
                groups["optimistic"].append(p.user_id)
            elif p.positive_peak is None:
                if scheme.separate_no_positive:
                    groups[NO_POSITIVE_GROUP].append(p.user_id)
                else:
                    groups[peak_label(3.5)].append(p.user_id)
                    folded += 1
            else:
                groups[peak_label(p.positive_peak)].append(p.user_id)
        if folded:
            notes.append(f"{folded} pessimistic users without positive ratings placed in {peak_label(3.5)}")
    else:  # pragma: no cover
        raise ValueError(f"unknown scheme {variant}")
    return Partition(scheme, tuple((g, frozenset(m)) for g, m in groups.items()), tuple(notes))


# -- exports ---------------------------------------------------------------

PROFILE_HEADER = ("userId", "nRatings", "negativeFraction", "bucket", "optimism",
                  "positivePeak", "extremePositiveRatio")


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_profiles_csv(profiles: Iterable[DispositionProfile], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for p in profiles:
        w.writerow((p.user_id, p.n_ratings, _fmt(p.negative_fraction), p.bucket.value,
                    p.optimism.value, _fmt(p.positive_peak), _fmt(p.extreme_positive_ratio)))


def bucket_histogram(profiles: Sequence[DispositionProfile]) -> list[tuple[str, int]]:
    counts = {b: 0 for b in Bucket}
    for p in profiles:
        counts[p.bucket] += 1
    return [(b.value, counts[b]) for b in Bucket]


def extreme_ratio_histogram(profiles: Sequence[DispositionProfile],
                            bins: int = 10) -> list[tuple[str, str, int]]:
    """Histogram of extreme-positive ratios per optimism class.

    Rows are ``(optimism, bin label, count)``; bins are left-closed except the
    last, and users without positive ratings are counted under ``none``.
    """
    edges = np.linspace(0.0, 1.0, bins + 1)
    rows = []
    for cls in Optimism:
        vals = [p.extreme_positive_ratio for p in profiles if p.optimism is cls]
        present = np.array([v for v in vals if v is not None], dtype=float)
        hist, _ = np.histogram(present, bins=edges)
        for lo, hi, c in zip(edges[:-1], edges[1:], hist):
            rows.append((cls.value, f"{lo:.1f}-{hi:.1f}", int(c)))
        rows.append((cls.value, "none", len(vals) - len(present)))
    return rows


def rating_histogram(ds: Dataset) -> list[tuple[float, int]]:
    grid = np.arange(1, 11) / 2
    return [(float(g), int(np.count_nonzero(ds.values == g))) for g in grid]
