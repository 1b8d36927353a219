"""Recommenders with a shared ``predict`` / ``predict_items`` contract."""

from __future__ import annotations

import enum

from ..ratings import Dataset
from .base import FallbackLevel, Prediction, clamp
from .knn import KnnMode, KnnModel, KnnParams, fit_knn, msd_similarity, predict_knn, similarity_matrix
from .svd import DivergedError, SvdModel, SvdParams, fit_svd, predict_svd, regularized_loss

__all__ = [
    "Algorithm", "FallbackLevel", "Prediction", "clamp",
    "KnnMode", "KnnModel", "KnnParams", "fit_knn", "msd_similarity", "predict_knn", "similarity_matrix",
    "DivergedError", "SvdModel", "SvdParams", "fit_svd", "predict_svd", "regularized_loss",
    "fit_model", "TrainedModel",
]

TrainedModel = KnnModel | SvdModel


class Algorithm(str, enum.Enum):
    USER_KNN = "user-knn"
    ITEM_KNN = "item-knn"
    SVD = "svd"


def fit_model(train: Dataset, algorithm: Algorithm | str, knn: KnnParams | None = None,
              svd: SvdParams | None = None, seed: int | None = None, n_jobs: int = 1) -> TrainedModel:
    """Fit ``algorithm`` on ``train``.  ``seed`` overrides the SVD params seed."""
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.SVD:
        params = svd or SvdParams()
        if seed is not None:
            params = SvdParams(**{**params.to_dict(), "seed": seed})
        return fit_svd(train, params)
    knn = knn or KnnParams()
    mode = KnnMode.USER_BASED if algorithm is Algorithm.USER_KNN else KnnMode.ITEM_BASED
    if knn.mode is not mode:
        knn = KnnParams(**{**knn.to_dict(), "mode": mode})
    return fit_knn(train, knn, n_jobs=n_jobs)
