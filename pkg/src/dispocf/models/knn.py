"""Neighborhood CF with mean centering and MSD similarity.

Estimates are the target's mean plus a similarity-weighted average of the
neighbors' deviations from their own means::

    est(u, i) = mu_u + sum_v sim(u, v) * (r_vi - mu_v) / sum_v sim(u, v)

over at most ``max_k`` neighbors with positive similarity who rated ``i``
(user-based); the item-based form swaps the roles of users and items.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .. import kernels
from ..ratings import Dataset
from .base import FallbackLevel, Prediction, clamp

__all__ = ["KnnMode", "KnnParams", "KnnModel", "msd_similarity", "fit_knn", "predict_knn",
           "similarity_matrix"]

DENSE_LIMIT = 20_000
BLOCK_ROWS = 256


class KnnMode(str, enum.Enum):
    USER_BASED = "user"
    ITEM_BASED = "item"


@dataclass(frozen=True)
class KnnParams:
    mode: KnnMode = KnnMode.USER_BASED
    min_k: int = 1
    max_k: int = 20
    min_support: int = 1
    clip: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", KnnMode(self.mode))
        if not 1 <= self.min_k <= self.max_k:
            raise ValueError(f"need 1 <= min_k <= max_k, got {self.min_k}, {self.max_k}")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


def msd_similarity(common: Sequence[tuple[float, float]], min_support: int = 1) -> float:
    """``1 / (msd + 1)`` over co-rating pairs; 0 without enough support."""
    n = len(common)
    if n == 0 or n < min_support:
        return 0.0
    sq = 0.0
    for a, b in common:
        sq += (a - b) ** 2
    return 1.0 / (sq / n + 1.0)


def _axes(mode: KnnMode) -> tuple[str, str]:
    return ("user", "item") if mode is KnnMode.USER_BASED else ("item", "user")


def similarity_matrix(train: Dataset, mode: KnnMode | str = KnnMode.USER_BASED,
                      min_support: int = 1, rows: np.ndarray | None = None,
                      n_jobs: int = 1, backend: str | None = None) -> np.ndarray:
    """MSD similarity rows over the active axis (all rows by default).

    Work is split in fixed row blocks; each block is independent, so the
    result does not depend on ``n_jobs``.
    """
    axis, other = _axes(KnnMode(mode))
    x = train.csr(axis)
    xt = train.csr(other)
    kern = kernels.get(backend)
    n = x.shape[0]
    rows = np.arange(n, dtype=np.int64) if rows is None else np.asarray(rows, dtype=np.int64)
    blocks = [rows[k:k + BLOCK_ROWS] for k in range(0, len(rows), BLOCK_ROWS)] or [rows]

    def run(block):
        return kern.msd_rows(x.indptr, x.indices, x.data, xt.indptr, xt.indices, xt.data,
                             n, block, min_support)

    if n_jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return np.vstack(parts) if parts else np.zeros((0, n))


class KnnModel:
    """A fitted neighborhood model.

    With more than ``dense_limit`` entities on the active axis the similarity
    matrix is not stored; rows are recomputed on demand with the same kernel,
    so predictions are identical either way.
    """

    def __init__(self, params: KnnParams, train: Dataset, similarity: np.ndarray | None):
        self.params = params
        self.train = train
        self.similarity = similarity
        if similarity is not None:
            similarity.setflags(write=False)
        self.global_mean = train.global_mean
        axis, other = _axes(params.mode)
        self._axis_csr = train.csr(axis)
        self._other_csr = train.csr(other)
        if params.mode is KnnMode.USER_BASED:
            self.axis_means, self.other_means = train.per_user_mean, train.per_item_mean
        else:
            self.axis_means, self.other_means = train.per_item_mean, train.per_user_mean

    @property
    def dense(self) -> bool:
        return self.similarity is not None

    @property
    def n_entities(self) -> int:
        return self._axis_csr.shape[0]

    def sim_rows(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        if self.similarity is not None:
            return self.similarity[rows]
        return similarity_matrix(self.train, self.params.mode, self.params.min_support, rows=rows)

    def predict(self, user: str, item: str) -> Prediction:
        est, levels = self.predict_items(user, [item])
        return Prediction(float(est[0]), levels[0])

    def predict_items(self, user: str, items: Sequence[str]) -> tuple[np.ndarray, list[FallbackLevel]]:
        """Estimates for one user over many items (vectorized over the batch)."""
        tr = self.train
        u = tr.user_index.get(user)
        idx = np.array([tr.item_index.get(i, -1) for i in items], dtype=np.int64)
        n = len(idx)
        est = np.empty(n, dtype=np.float64)
        levels = [FallbackLevel.FULL] * n
        known = idx >= 0
        user_based = self.params.mode is KnnMode.USER_BASED

        if u is None:
            for k in range(n):
                if known[k]:
                    est[k] = tr.per_item_mean[idx[k]]
                    levels[k] = FallbackLevel.AXIS_MEAN_ONLY
                else:
                    est[k] = self.global_mean
                    levels[k] = FallbackLevel.GLOBAL_MEAN
            return clamp(est, self.params.clip), levels

        for k in np.flatnonzero(~known):
            est[k] = tr.per_user_mean[u]
            levels[k] = FallbackLevel.AXIS_MEAN_ONLY
        q_items = idx[known]
        if len(q_items):
            if user_based:
                sim = self.sim_rows(np.array([u]))
                row_of_query = np.zeros(len(q_items), dtype=np.int64)
                csr = self._other_csr  # items x users
                starts, ends = csr.indptr[q_items], csr.indptr[q_items + 1]
                seg_ptr = np.concatenate(([0], np.cumsum(ends - starts))).astype(np.int64)
                take = np.concatenate([np.arange(s, e) for s, e in zip(starts, ends)]) \
                    if len(q_items) else np.zeros(0, dtype=np.int64)
                nbr_idx = csr.indices[take].astype(np.int64)
                nbr_vals = csr.data[take]
                base = np.full(len(q_items), tr.per_user_mean[u])
            else:
                sim = self.sim_rows(q_items)
                row_of_query = np.arange(len(q_items), dtype=np.int64)
                csr = self._other_csr  # users x items
                s, e = csr.indptr[u], csr.indptr[u + 1]
                seg_ptr = (np.arange(len(q_items) + 1) * (e - s)).astype(np.int64)
                nbr_idx = np.tile(csr.indices[s:e].astype(np.int64), len(q_items))
                nbr_vals = np.tile(csr.data[s:e], len(q_items))
                base = tr.per_item_mean[q_items]
            dev, used = kernels.get().knn_aggregate(
                sim, row_of_query, seg_ptr, nbr_idx, nbr_vals, self.axis_means,
                self.params.max_k, self.params.min_k)
            ok = used >= self.params.min_k
            vals = np.where(ok, base + dev, base)
            pos = np.flatnonzero(known)
            est[pos] = vals
            for k, good in zip(pos, ok):
                if not good:
                    levels[k] = FallbackLevel.AXIS_MEAN_ONLY
        return clamp(est, self.params.clip), levels


def fit_knn(train: Dataset, params: KnnParams | None = None, n_jobs: int = 1,
            dense_limit: int = DENSE_LIMIT, backend: str | None = None) -> KnnModel:
    params = params or KnnParams()
    if len(train) == 0:
        raise ValueError("cannot fit on an empty dataset")
    n = train.n_users if params.mode is KnnMode.USER_BASED else train.n_items
    sim = None
    if n <= dense_limit:
        sim = similarity_matrix(train, params.mode, params.min_support, n_jobs=n_jobs, backend=backend)
    return KnnModel(params, train, sim)


def predict_knn(model: KnnModel, user: str, item: str) -> Prediction:
    return model.predict(user, item)
