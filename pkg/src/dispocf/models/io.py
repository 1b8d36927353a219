"""Model files: a NumPy ``.npz`` archive, version-tagged.

Keys common to every model::

    format      "dispocf-model"
    version     format version (int)
    kind        "knn" or "svd"
    params      JSON object of the model parameters

KNN archives add the training ratings (``user_ids``, ``item_ids``,
``user_codes``, ``item_codes``, ``values``) and ``similarity`` when the
matrix was stored densely.  SVD archives add ``global_mean``, ``user_ids``,
``item_ids``, ``user_bias``, ``item_bias``, ``user_factors``,
``item_factors`` and ``loss_history``.  Arrays are stored exactly, so loaded
models predict bit-identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..ratings import Dataset
from .knn import KnnModel, KnnParams
from .svd import SvdModel, SvdParams

FORMAT = "dispocf-model"
VERSION = 1


def save_model(model: KnnModel | SvdModel, path: str | Path) -> None:
    common = {"format": np.array(FORMAT), "version": np.array(VERSION)}
    if isinstance(model, KnnModel):
        tr = model.train
        arrays = dict(
            kind=np.array("knn"),
            params=np.array(json.dumps(model.params.to_dict(), sort_keys=True)),
            user_ids=np.array(tr.user_ids, dtype=str),
            item_ids=np.array(tr.item_ids, dtype=str),
            user_codes=tr.user_codes, item_codes=tr.item_codes, values=tr.values,
        )
        if model.similarity is not None:
            arrays["similarity"] = model.similarity
    elif isinstance(model, SvdModel):
        arrays = dict(
            kind=np.array("svd"),
            params=np.array(json.dumps(model.params.to_dict(), sort_keys=True)),
            global_mean=np.array(model.global_mean),
            user_ids=np.array(model.user_ids, dtype=str),
            item_ids=np.array(model.item_ids, dtype=str),
            user_bias=model.user_bias, item_bias=model.item_bias,
            user_factors=model.user_factors, item_factors=model.item_factors,
            loss_history=np.array(model.loss_history, dtype=np.float64),
        )
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    with open(path, "wb") as fh:
        np.savez(fh, **common, **arrays)


def load_model(path: str | Path) -> KnnModel | SvdModel:
    with np.load(path, allow_pickle=False) as z:
        if str(z["format"]) != FORMAT:
            raise ValueError(f"{path}: not a model file")
        version = int(z["version"])
        if version != VERSION:
            raise ValueError(f"{path}: unsupported model format version {version}")
        kind = str(z["kind"])
        params = json.loads(str(z["params"]))
        if kind == "knn":
            train = Dataset.from_codes(z["user_ids"], z["item_ids"], z["user_codes"],
                                       z["item_codes"], z["values"])
            sim = np.array(z["similarity"]) if "similarity" in z.files else None
            return KnnModel(KnnParams(**params), train, sim)
        if kind == "svd":
            return SvdModel(SvdParams(**params), float(z["global_mean"]),
                            tuple(str(u) for u in z["user_ids"]), tuple(str(i) for i in z["item_ids"]),
                            np.array(z["user_bias"]), np.array(z["item_bias"]),
                            np.array(z["user_factors"]), np.array(z["item_factors"]),
                            [float(x) for x in z["loss_history"]])
        raise ValueError(f"{path}: unknown model kind {kind!r}")
