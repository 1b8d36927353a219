"""Biased matrix factorization (Funk SVD) trained by per-rating SGD."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .. import kernels
from ..ratings import Dataset
from .base import FallbackLevel, Prediction, clamp

__all__ = ["SvdParams", "SvdModel", "DivergedError", "fit_svd", "predict_svd", "regularized_loss"]


class DivergedError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class SvdParams:
    n_factors: int = 10
    n_epochs: int = 20
    learning_rate: float = 0.005
    regularization: float = 0.02
    init_std: float = 0.1
    seed: int = 0
    clip: bool = True

    def __post_init__(self):
        if self.n_factors < 1:
            raise ValueError("n_factors must be >= 1")
        if self.n_epochs < 0:
            raise ValueError("n_epochs must be >= 0")
        if self.learning_rate <= 0 or self.regularization < 0 or self.init_std < 0:
            raise ValueError("learning_rate must be positive; regularization and init_std non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SvdModel:
    params: SvdParams
    global_mean: float
    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    user_bias: np.ndarray
    item_bias: np.ndarray
    user_factors: np.ndarray
    item_factors: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.user_index = {u: k for k, u in enumerate(self.user_ids)}
        self.item_index = {i: k for k, i in enumerate(self.item_ids)}
        for a in (self.user_bias, self.item_bias, self.user_factors, self.item_factors):
            a.setflags(write=False)

    def predict(self, user: str, item: str) -> Prediction:
        u = self.user_index.get(user)
        i = self.item_index.get(item)
        est = self.global_mean
        if u is not None:
            est += self.user_bias[u]
        if i is not None:
            est += self.item_bias[i]
        if u is not None and i is not None:
            est += kernels.get().predict_dot(self.user_factors[u], self.item_factors[i])
            level = FallbackLevel.FULL
        elif u is None and i is None:
            level = FallbackLevel.GLOBAL_MEAN
        else:
            level = FallbackLevel.AXIS_MEAN_ONLY
        return Prediction(float(clamp(est, self.params.clip)), level)

    def predict_items(self, user: str, items: Sequence[str]) -> tuple[np.ndarray, list[FallbackLevel]]:
        u = self.user_index.get(user)
        idx = np.array([self.item_index.get(i, -1) for i in items], dtype=np.int64)
        known = idx >= 0
        est = np.full(len(idx), self.global_mean)
        if u is not None:
            est = est + self.user_bias[u]
        est = est + np.where(known, self.item_bias[np.where(known, idx, 0)], 0.0)
        if u is not None and known.any():
            q = self.item_factors[idx[known]]
            pu = self.user_factors[u]
            dot = np.zeros(len(q))
            for f in range(q.shape[1]):  # same accumulation order as predict()
                dot += q[:, f] * pu[f]
            est[known] += dot
        if u is None:
            levels = [FallbackLevel.AXIS_MEAN_ONLY if k else FallbackLevel.GLOBAL_MEAN for k in known]
        else:
            levels = [FallbackLevel.FULL if k else FallbackLevel.AXIS_MEAN_ONLY for k in known]
        return clamp(est, self.params.clip), levels


def regularized_loss(train: Dataset, model: SvdModel, reg: float | None = None) -> float:
    """Sum of squared errors plus ``reg`` times the squared norm of the
    parameters touched by each rating, summed over ratings (the objective the
    per-rating updates descend)."""
    reg = model.params.regularization if reg is None else reg
    u, i = train.user_codes, train.item_codes
    # a diverging run overflows here; the caller turns the inf into DivergedError
    with np.errstate(over="ignore", invalid="ignore"):
        pred = (model.global_mean + model.user_bias[u] + model.item_bias[i]
                + np.einsum("ij,ij->i", model.user_factors[u], model.item_factors[i]))
        err = train.values - pred
        penalty = (model.user_bias[u] ** 2 + model.item_bias[i] ** 2
                   + (model.user_factors[u] ** 2).sum(axis=1) + (model.item_factors[i] ** 2).sum(axis=1))
        return float(np.sum(err ** 2) + reg * np.sum(penalty))


def fit_svd(train: Dataset, params: SvdParams | None = None, backend: str | None = None) -> SvdModel:
    """Fit biases and factors; ``loss_history[e]`` is the loss after ``e`` epochs."""
    params = params or SvdParams()
    if len(train) == 0:
        raise ValueError("cannot fit on an empty dataset")
    rng = np.random.default_rng(params.seed)
    nf = params.n_factors
    bu = np.zeros(train.n_users)
    bi = np.zeros(train.n_items)
    p = np.ascontiguousarray(rng.normal(0.0, params.init_std, (train.n_users, nf)))
    q = np.ascontiguousarray(rng.normal(0.0, params.init_std, (train.n_items, nf)))
    mu = train.global_mean
    users = np.ascontiguousarray(train.user_codes, dtype=np.int64)
    items = np.ascontiguousarray(train.item_codes, dtype=np.int64)
    values = np.ascontiguousarray(train.values)
    kern = kernels.get(backend)

    def snapshot() -> SvdModel:
        return SvdModel(params, mu, train.user_ids, train.item_ids,
                        bu.copy(), bi.copy(), p.copy(), q.copy())

    history = [regularized_loss(train, snapshot())]
    for epoch in range(params.n_epochs):
        order = rng.permutation(len(train)).astype(np.int64)
        kern.sgd_epoch(users, items, values, order, mu, bu, bi, p, q,
                       params.learning_rate, params.regularization)
        loss = regularized_loss(train, snapshot())
        if not math.isfinite(loss):
            raise DivergedError(f"loss became non-finite at epoch {epoch + 1}")
        history.append(loss)
    model = snapshot()
    model.loss_history = history
    return model


def predict_svd(model: SvdModel, user: str, item: str) -> Prediction:
    return model.predict(user, item)
