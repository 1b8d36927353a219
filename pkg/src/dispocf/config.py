"""Run configuration: INI file sections overridden by command-line flags.

Schema (every key optional; flags win over the file)::

    [run]
    input = ratings.csv        ; ratings CSV or cached .npz
    out = results/
    seed = 42                  ; required by synth / evaluate / experiment
    algo = user-knn            ; user-knn | item-knn | svd
    scheme = binary            ; binary | neg-bucket | pos-peak | identity
    folds = 5
    threshold = 0.30           ; optimistic / pessimistic cut on negative share
    min_ratings = 0            ; drop users with fewer ratings (0 = keep all)
    pairing = fold             ; fold | user
    separate_no_positive = no
    n_jobs = 1

    [eval]
    k = 8
    relevance_threshold = 3.5
    padding_ratio = 1.0
    gains = binary             ; binary | graded

    [knn]
    min_k = 1
    max_k = 20
    min_support = 1
    clip = yes

    [svd]
    n_factors = 10
    n_epochs = 20
    learning_rate = 0.005
    regularization = 0.02
    init_std = 0.1
    clip = yes

``[synthetic]`` and ``[population.NAME]`` sections configure ``synth``; see
:mod:`dispocf.synthetic`.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .disposition import PartitionScheme
from .evaluation import EvalParams
from .experiment import ExperimentConfig
from .models import Algorithm, KnnParams, SvdParams

__all__ = ["ConfigError", "RunConfig", "resolve"]


class ConfigError(ValueError):
    """One or more configuration problems; ``errors`` lists them all."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


_RUN_TYPES: dict[str, Any] = {
    "input": str, "out": str, "seed": int, "algo": str, "scheme": str, "folds": int,
    "threshold": float, "min_ratings": int, "pairing": str, "separate_no_positive": bool,
    "n_jobs": int,
}
_EVAL_TYPES = {"k": int, "relevance_threshold": float, "padding_ratio": float, "gains": str}
_KNN_TYPES = {"min_k": int, "max_k": int, "min_support": int, "clip": bool}
_SVD_TYPES = {"n_factors": int, "n_epochs": int, "learning_rate": float, "regularization": float,
              "init_std": float, "clip": bool}


@dataclass
class RunConfig:
    input: str | None = None
    out: str | None = None
    seed: int | None = None
    algo: str = "user-knn"
    scheme: str = "binary"
    folds: int = 5
    threshold: float = 0.30
    min_ratings: int = 0
    pairing: str = "fold"
    separate_no_positive: bool = False
    n_jobs: int = 1
    eval: dict = field(default_factory=dict)
    knn: dict = field(default_factory=dict)
    svd: dict = field(default_factory=dict)
    parser: configparser.ConfigParser | None = field(default=None, repr=False)

    def eval_params(self) -> EvalParams:
        return EvalParams(**self.eval)

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            algorithm=Algorithm(self.algo),
            scheme=PartitionScheme(self.scheme, self.threshold, self.separate_no_positive),
            folds=self.folds,
            eval=self.eval_params(),
            knn=KnnParams(**self.knn),
            svd=SvdParams(**self.svd),
            seed=self.seed,
            pairing=self.pairing,
            n_jobs=self.n_jobs,
        )

    def resolved(self) -> dict:
        """Everything that determines a run, for embedding in outputs."""
        cfg = self.experiment_config().to_dict()
        cfg["input"] = self.input
        cfg["min_ratings"] = self.min_ratings
        return cfg


def _read_section(cp: configparser.ConfigParser, section: str, types: dict, errors: list[str]) -> dict:
    out: dict[str, Any] = {}
    if not cp.has_section(section):
        return out
    for key in cp[section]:
        if key not in types:
            errors.append(f"[{section}] unknown key {key!r}")
            continue
        try:
            if types[key] is bool:
                out[key] = cp[section].getboolean(key)
            elif types[key] is int:
                out[key] = cp[section].getint(key)
            elif types[key] is float:
                out[key] = cp[section].getfloat(key)
            else:
                out[key] = cp[section][key]
        except ValueError:
            errors.append(f"[{section}] {key} = {cp[section][key]!r} is not a valid {types[key].__name__}")
    return out


def resolve(config_path: str | Path | None, overrides: dict[str, Any],
            require_seed: bool = False) -> RunConfig:
    """Merge a config file with flag overrides and validate.

    ``overrides`` keys are run keys plus ``k`` (eval cutoff); ``None`` values
    mean "not given".  All problems are reported together via
    :class:`ConfigError`.
    """
    errors: list[str] = []
    cp = configparser.ConfigParser()
    if config_path is not None:
        try:
            if not cp.read(config_path):
                raise ConfigError([f"cannot read config file {config_path}"])
        except configparser.Error as exc:
            raise ConfigError([f"{config_path}: {exc}"]) from None
    run = _read_section(cp, "run", _RUN_TYPES, errors)
    ev = _read_section(cp, "eval", _EVAL_TYPES, errors)
    knn = _read_section(cp, "knn", _KNN_TYPES, errors)
    svd = _read_section(cp, "svd", _SVD_TYPES, errors)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "k":
            ev["k"] = value
        else:
            run[key] = value
    rc = RunConfig(**run, eval=ev, knn=knn, svd=svd, parser=cp)

    if require_seed and rc.seed is None:
        errors.append("a seed is required (--seed or [run] seed)")
    if rc.algo not in {a.value for a in Algorithm}:
        errors.append(f"unknown algorithm {rc.algo!r}")
    if rc.scheme not in ("binary", "neg-bucket", "pos-peak", "identity"):
        errors.append(f"unknown scheme {rc.scheme!r}")
    if rc.folds < 2:
        errors.append("folds must be >= 2")
    if not 0.0 < rc.threshold < 1.0:
        errors.append("threshold must lie in (0, 1)")
    if rc.pairing not in ("fold", "user"):
        errors.append("pairing must be 'fold' or 'user'")
    if rc.min_ratings < 0:
        errors.append("min_ratings must be >= 0")
    for name, build in (("eval", lambda: EvalParams(**rc.eval)), ("knn", lambda: KnnParams(**rc.knn)),
                        ("svd", lambda: SvdParams(**rc.svd))):
        try:
            build()
        except (TypeError, ValueError) as exc:
            errors.append(f"[{name}] {exc}")
    if errors:
        raise ConfigError(errors)
    return rc
