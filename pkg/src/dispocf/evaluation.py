"""Offline metrics: RMSE, precision@k and NDCG@k with unrated-item padding.

Each test user's candidate pool is their held-out items plus an equal number
(by default) of items they never rated anywhere in the full dataset.  The
model scores the pool; the top ``k`` of that ranking are judged.  Padded
items carry zero gain and never enter RMSE.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ratings import Dataset, DatasetError

__all__ = [
    "EvalParams",
    "UserMetrics",
    "MetricsReport",
    "rmse",
    "precision_at_k",
    "ndcg_at_k",
    "build_candidates",
    "evaluate_model",
]


@dataclass(frozen=True)
class EvalParams:
    k: int = 8
    relevance_threshold: float = 3.5
    padding_ratio: float = 1.0
    seed: int = 0
    gains: str = "binary"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.relevance_threshold * 2 != round(self.relevance_threshold * 2):
            raise ValueError("relevance_threshold must be on the half-star grid")
        if self.padding_ratio < 0:
            raise ValueError("padding_ratio must be >= 0")
        if self.gains not in ("binary", "graded"):
            raise ValueError("gains must be 'binary' or 'graded'")

    def to_dict(self) -> dict:
        return asdict(self)


def rmse(pairs: Iterable[tuple[float, float]]) -> float:
    """Root mean squared error pooled over ``(actual, predicted)`` pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("rmse of no pairs")
    a = np.array([p[0] for p in pairs], dtype=float)
    b = np.array([p[1] for p in pairs], dtype=float)
    return math.sqrt(float(np.sum((a - b) ** 2)) / len(pairs))


def precision_at_k(ranked: Sequence, relevant: set | frozenset, k: int) -> float:
    if not ranked:
        raise ValueError("empty ranking")
    n = min(k, len(ranked))
    return sum(1 for item in ranked[:n] if item in relevant) / n


def _dcg(gains: Sequence[float]) -> float:
    return float(sum(g / math.log2(r + 2) for r, g in enumerate(gains)))


def ndcg_at_k(ranked: Sequence, relevance: Mapping, k: int) -> float:
    """NDCG over the top ``k``; the ideal ordering is taken over the same pool.

    Items missing from ``relevance`` have gain 0.  Returns 0 when the pool has
    no gain at all.
    """
    if not ranked:
        raise ValueError("empty ranking")
    gains = [float(relevance.get(item, 0.0)) for item in ranked]
    ideal = _dcg(sorted(gains, reverse=True)[:k])
    if ideal == 0.0:
        return 0.0
    return _dcg(gains[:k]) / ideal


# -- candidates ------------------------------------------------------------

@dataclass(frozen=True)
class Candidates:
    items: list[str]
    scores: np.ndarray
    n_test: int
    n_padding: int
    n_padding_requested: int


def _padding_rng(seed: int, user_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, user_index])


def _candidates(model, user: str, test_items: Sequence[str], full: Dataset,
                seed: int, padding_ratio: float) -> Candidates:
    if not test_items:
        raise ValueError(f"user {user!r} has no test items")
    want = math.ceil(padding_ratio * len(test_items))
    pad: list[str] = []
    if want:
        u = full.user_index[user]
        rated = np.unique(full.item_codes[full.user_codes == u])
        unrated = np.setdiff1d(np.arange(full.n_items), rated, assume_unique=True)
        take = min(want, len(unrated))
        if take:
            chosen = _padding_rng(seed, u).choice(unrated, size=take, replace=False)
            pad = [full.item_ids[j] for j in chosen]
    pool = list(test_items) + pad
    scores, _ = model.predict_items(user, pool)
    index = np.array([full.item_index.get(i, len(full.item_index)) for i in pool])
    order = np.lexsort((index, -scores))
    return Candidates([pool[j] for j in order], scores[order], len(test_items), len(pad), want)


def build_candidates(model, user: str, test_items: Sequence[str], full: Dataset, seed: int,
                     padding_ratio: float = 1.0) -> list[str]:
    """Test items plus sampled unrated items, ranked by descending estimate
    (ties by ascending item index in ``full``)."""
    return _candidates(model, user, test_items, full, seed, padding_ratio).items


# -- reports ---------------------------------------------------------------

@dataclass(frozen=True)
class UserMetrics:
    user_id: str
    n_test: int
    n_candidates: int
    ndcg: float
    precision: float
    squared_error: float


@dataclass
class MetricsReport:
    per_user: list[UserMetrics]
    ndcg: float
    precision: float
    rmse: float
    n_users: int
    n_pairs: int
    params: EvalParams
    warnings: list[str] = field(default_factory=list)

    def metrics(self) -> dict[str, float]:
        return {"ndcg": self.ndcg, "precision": self.precision, "rmse": self.rmse}

    def to_dict(self, include_users: bool = False) -> dict:
        d = {
            "params": self.params.to_dict(),
            "n_users": self.n_users,
            "n_pairs": self.n_pairs,
            "aggregation": "rank metrics averaged over users; rmse pooled over test pairs",
            "metrics": self.metrics(),
            "warnings": list(self.warnings),
        }
        if include_users:
            d["per_user"] = [asdict(m) for m in self.per_user]
        return d

    def to_json(self, **extra) -> str:
        return json.dumps({**extra, **self.to_dict(include_users=True)}, indent=2, sort_keys=True)

    def to_csv(self, header: Mapping | None = None) -> str:
        out = io.StringIO()
        if header:
            out.write(f"# {json.dumps(header, sort_keys=True)}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("userId", "nTest", "nCandidates", f"ndcg@{self.params.k}",
                    f"precision@{self.params.k}", "squaredError"))
        for m in self.per_user:
            w.writerow((m.user_id, m.n_test, m.n_candidates, repr(m.ndcg), repr(m.precision),
                        repr(m.squared_error)))
        return out.getvalue()


def _evaluate_user(model, user: str, items: list[str], actual: np.ndarray, full: Dataset,
                   params: EvalParams) -> tuple[UserMetrics, str | None]:
    cand = _candidates(model, user, items, full, params.seed, params.padding_ratio)
    truth = dict(zip(items, actual.tolist()))
    if params.gains == "binary":
        gain = {i: 1.0 for i, r in truth.items() if r >= params.relevance_threshold}
    else:
        gain = {i: r for i, r in truth.items() if r >= params.relevance_threshold}
    relevant = set(gain)
    est = {i: s for i, s in zip(cand.items, cand.scores.tolist())}
    sq = 0.0
    for i, r in zip(items, actual.tolist()):
        sq += (r - est[i]) ** 2
    warning = None
    if cand.n_padding < cand.n_padding_requested:
        warning = (f"user {user}: only {cand.n_padding} of {cand.n_padding_requested} "
                   f"padding items available")
    m = UserMetrics(user, len(items), len(cand.items), ndcg_at_k(cand.items, gain, params.k),
                    precision_at_k(cand.items, relevant, params.k), sq)
    return m, warning


def evaluate_model(model, test: Dataset, full: Dataset, params: EvalParams | None = None,
                   n_jobs: int = 1) -> MetricsReport:
    """Score ``model`` on ``test``; padding is drawn from items unrated in ``full``.

    Users are processed in ``full`` index order; the padding RNG for a user is
    derived from ``(params.seed, user index)`` so it is the same for any model
    evaluated on that user.
    """
    params = params or EvalParams()
    if len(test) == 0:
        raise DatasetError("empty test set")
    missing = [u for u in test.user_ids if u not in full.user_index]
    if missing:
        raise DatasetError(f"test users not in the full dataset: {missing[:5]}")
    order = np.argsort(test.user_codes, kind="stable")
    bounds = np.flatnonzero(np.diff(test.user_codes[order])) + 1
    jobs = []
    for rows in np.split(order, bounds):
        user = test.user_ids[test.user_codes[rows[0]]]
        items = [test.item_ids[j] for j in test.item_codes[rows]]
        jobs.append((full.user_index[user], user, items, test.values[rows]))
    jobs.sort(key=lambda j: j[0])

    def run(job):
        return _evaluate_user(model, job[1], job[2], job[3], full, params)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    per_user = [m for m, _ in results]
    warnings = [w for _, w in results if w]
    n_pairs = sum(m.n_test for m in per_user)
    sq = 0.0
    for m in per_user:
        sq += m.squared_error
    return MetricsReport(
        per_user=per_user,
        ndcg=float(np.mean([m.ndcg for m in per_user])),
        precision=float(np.mean([m.precision for m in per_user])),
        rmse=math.sqrt(sq / n_pairs),
        n_users=len(per_user),
        n_pairs=n_pairs,
        params=params,
        warnings=warnings,
    )
