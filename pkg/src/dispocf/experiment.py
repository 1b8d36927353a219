"""Pooled-vs-partitioned comparison with shared folds and paired t-tests.

For every fold the pooled model is trained on the whole training split and
scored separately on each group's held-out ratings; each group's own model is
trained on that group's slice of the same training split and scored on the
identical held-out ratings.  Per-fold metric pairs then go through a two-sided
paired t-test with a Bonferroni factor of 3 (one per metric).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import zlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .disposition import Partition, PartitionScheme, partition_users, profile_users
from .evaluation import EvalParams, MetricsReport, evaluate_model
from .models import Algorithm, KnnParams, SvdParams, fit_model
from .ratings import Dataset, DatasetError, FoldAssignment, split_folds
from .stats import bonferroni_adjust, paired_t_test

__all__ = [
    "METRICS",
    "ExperimentConfig",
    "MetricTest",
    "GroupComparison",
    "ComparisonReport",
    "derive_seed",
    "run_cross_validation",
    "run_partition_experiment",
]

log = logging.getLogger(__name__)

METRICS = ("ndcg", "precision", "rmse")
HIGHER_IS_BETTER = {"ndcg": True, "precision": True, "rmse": False}
ALPHA = 0.05


def derive_seed(master: int, purpose: str, *keys: int) -> int:
    """Independent 63-bit seed for ``(purpose, *keys)`` under ``master``."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(purpose.encode()), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: Algorithm = Algorithm.USER_KNN
    scheme: PartitionScheme = field(default_factory=PartitionScheme)
    folds: int = 5
    eval: EvalParams = field(default_factory=EvalParams)
    knn: KnnParams = field(default_factory=KnnParams)
    svd: SvdParams = field(default_factory=SvdParams)
    seed: int = 0
    pairing: str = "fold"
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.pairing not in ("fold", "user"):
            raise ValueError("pairing must be 'fold' or 'user'")

    def to_dict(self) -> dict:
        d = {
            "algorithm": self.algorithm.value,
            "scheme": {"variant": self.scheme.variant.value, "threshold": self.scheme.threshold,
                       "separate_no_positive": self.scheme.separate_no_positive},
            "folds": self.folds,
            "eval": {k: v for k, v in self.eval.to_dict().items() if k != "seed"},
            "seed": self.seed,
            "pairing": self.pairing,
        }
        if self.algorithm is Algorithm.SVD:
            d["svd"] = {k: v for k, v in self.svd.to_dict().items() if k != "seed"}
        else:
            d["knn"] = {k: v for k, v in self.knn.to_dict().items() if k != "mode"}
        return d


def _fold_seeds(cfg: ExperimentConfig, fold: int) -> tuple[int, EvalParams]:
    model_seed = derive_seed(cfg.seed, "model", fold)
    ev = EvalParams(**{**cfg.eval.to_dict(), "seed": derive_seed(cfg.seed, "padding", fold)})
    return model_seed, ev


def _fit(train: Dataset, cfg: ExperimentConfig, seed: int):
    return fit_model(train, cfg.algorithm, knn=cfg.knn, svd=cfg.svd, seed=seed, n_jobs=cfg.n_jobs)


def _folds(ds: Dataset, cfg: ExperimentConfig) -> FoldAssignment:
    return split_folds(ds, cfg.folds, derive_seed(cfg.seed, "folds"))


def run_cross_validation(ds: Dataset, cfg: ExperimentConfig) -> list[MetricsReport]:
    """Train on k-1 folds, evaluate on the held-out fold, for every fold."""
    if len(ds) == 0:
        raise DatasetError("dataset is empty")
    reports = []
    for f, train_idx, test_idx in _folds(ds, cfg):
        model_seed, ev = _fold_seeds(cfg, f)
        model = _fit(ds.subset(train_idx), cfg, model_seed)
        reports.append(evaluate_model(model, ds.subset(test_idx), ds, ev, n_jobs=cfg.n_jobs))
        log.info("fold %d: %s", f, reports[-1].metrics())
    return reports


# -- comparison report -----------------------------------------------------

@dataclass
class MetricTest:
    metric: str
    pooled: list[float]
    partitioned: list[float]
    t: float
    p: float
    p_adjusted: float

    @property
    def pooled_mean(self) -> float:
        return float(np.mean(self.pooled))

    @property
    def partitioned_mean(self) -> float:
        return float(np.mean(self.partitioned))

    @property
    def improved(self) -> bool:
        if HIGHER_IS_BETTER[self.metric]:
            return self.partitioned_mean > self.pooled_mean
        return self.partitioned_mean < self.pooled_mean

    @property
    def significant(self) -> bool:
        return self.p_adjusted < ALPHA


@dataclass
class GroupComparison:
    label: str
    n_users: int
    test_pairs: list[int]
    pooled: dict[str, list[float]]
    partitioned: dict[str, list[float]]
    tests: dict[str, MetricTest] = field(default_factory=dict)
    excluded: str | None = None


def _num(x: float) -> Any:
    return x if math.isfinite(x) else repr(x)


@dataclass
class ComparisonReport:
    config: dict
    seeds: dict[str, Any]
    group_sizes: dict[str, int]
    all_users: dict[str, list[float]]
    groups: list[GroupComparison]
    warnings: list[str]
    notes: list[str]

    def group(self, label: str) -> GroupComparison:
        for g in self.groups:
            if g.label == label:
                return g
        raise KeyError(label)

    def provenance(self) -> dict:
        return {"config": self.config, "seeds": self.seeds, "group_sizes": self.group_sizes}

    def to_dict(self) -> dict:
        groups = []
        for g in self.groups:
            groups.append({
                "label": g.label,
                "n_users": g.n_users,
                "test_pairs": g.test_pairs,
                "excluded": g.excluded,
                "pooled": g.pooled,
                "partitioned": g.partitioned,
                "tests": {m: {"pooled_mean": t.pooled_mean, "partitioned_mean": t.partitioned_mean,
                              "t": _num(t.t), "p": t.p, "p_adjusted": t.p_adjusted,
                              "improved": t.improved, "significant": t.significant}
                          for m, t in g.tests.items()},
            })
        return {**self.provenance(), "all_users": self.all_users, "groups": groups,
                "warnings": self.warnings, "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# {json.dumps(self.provenance(), sort_keys=True)}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("group", "nUsers", "metric", "pooledMean", "partitionedMean", "t", "p",
                    "pAdjusted", "improved", "pooledPerFold", "partitionedPerFold"))
        for m in METRICS:
            w.writerow(("all users", sum(self.group_sizes.values()), m,
                        repr(float(np.mean(self.all_users[m]))), "", "", "", "", "",
                        " ".join(repr(x) for x in self.all_users[m]), ""))
        for g in self.groups:
            for m in METRICS:
                t = g.tests.get(m)
                if t is None:
                    w.writerow((g.label, g.n_users, m, "", "", "", "", "", "", "", ""))
                    continue
                w.writerow((g.label, g.n_users, m, repr(t.pooled_mean), repr(t.partitioned_mean),
                            repr(t.t), repr(t.p), repr(t.p_adjusted), int(t.improved),
                            " ".join(repr(x) for x in t.pooled),
                            " ".join(repr(x) for x in t.partitioned)))
        return out.getvalue()

    def to_table(self) -> str:
        """Aligned text table: ``*x*`` marks an improved partitioned value,
        ``†p=`` a Bonferroni-adjusted p below 0.05."""
        k = self.config["eval"]["k"]
        names = {"ndcg": f"ndcg@{k}", "precision": f"precision@{k}", "rmse": "rmse"}
        rows = [("test group", "users", "metric", "all users", "partitioned", "t", "p(adj)")]
        total = sum(self.group_sizes.values())
        for m in METRICS:
            rows.append(("all users", str(total), names[m], f"{np.mean(self.all_users[m]):.3f}",
                         "-", "", ""))
        for g in self.groups:
            for m in METRICS:
                t = g.tests.get(m)
                if t is None:
                    rows.append((g.label, str(g.n_users), names[m], "-", "-", "",
                                 f"excluded: {g.excluded}" if m == METRICS[0] else ""))
                    continue
                cell = f"{t.partitioned_mean:.3f}"
                if t.improved:
                    cell = f"*{cell}*"
                if t.significant:
                    cell += f" †p={t.p_adjusted:.3f}"
                rows.append((g.label, str(g.n_users), names[m], f"{t.pooled_mean:.3f}", cell,
                             f"{t.t:.3f}", f"{t.p_adjusted:.3f}"))
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        lines = [f"# {json.dumps(self.provenance(), sort_keys=True)}"]
        for n, r in enumerate(rows):
            lines.append("  ".join(c.ljust(wd) for c, wd in zip(r, widths)).rstrip())
            if n == 0:
                lines.append("  ".join("-" * wd for wd in widths))
        lines.extend(f"note: {x}" for x in self.notes)
        lines.extend(f"warning: {x}" for x in self.warnings)
        return "\n".join(lines) + "\n"


# -- driver ----------------------------------------------------------------

def _user_metric_pairs(pooled: list[MetricsReport], part: list[MetricsReport]) -> dict[str, tuple]:
    a: dict[str, list[float]] = {m: [] for m in METRICS}
    b: dict[str, list[float]] = {m: [] for m in METRICS}
    for rp, rq in zip(pooled, part):
        for up, uq in zip(rp.per_user, rq.per_user):
            assert up.user_id == uq.user_id
            a["ndcg"].append(uq.ndcg)
            b["ndcg"].append(up.ndcg)
            a["precision"].append(uq.precision)
            b["precision"].append(up.precision)
            a["rmse"].append(math.sqrt(uq.squared_error / uq.n_test))
            b["rmse"].append(math.sqrt(up.squared_error / up.n_test))
    return {m: (a[m], b[m]) for m in METRICS}


def run_partition_experiment(ds: Dataset, cfg: ExperimentConfig,
                             partition: Partition | None = None) -> ComparisonReport:
    """Compare the pooled model against per-group models on shared folds.

    ``t`` statistics are computed on ``partitioned - pooled``.
    """
    if len(ds) == 0:
        raise DatasetError("dataset is empty")
    if partition is None:
        partition = partition_users(profile_users(ds, cfg.scheme.threshold), cfg.scheme)
    if not any(members for _, members in partition.groups):
        raise DatasetError("partition has no non-empty group")
    folds = _folds(ds, cfg)
    warnings: list[str] = []

    member_masks = {}
    for label, members in partition.groups:
        m = np.zeros(ds.n_users, dtype=bool)
        m[[ds.user_index[u] for u in members]] = True
        member_masks[label] = m

    all_users = {m: [] for m in METRICS}
    groups = {label: GroupComparison(label, len(members), [], {m: [] for m in METRICS},
                                     {m: [] for m in METRICS})
              for label, members in partition.groups}
    raw_reports: dict[str, tuple[list, list]] = {label: ([], []) for label in groups}

    for f, train_idx, test_idx in folds:
        model_seed, ev = _fold_seeds(cfg, f)
        train = ds.subset(train_idx)
        pooled = _fit(train, cfg, model_seed)
        rep = evaluate_model(pooled, ds.subset(test_idx), ds, ev, n_jobs=cfg.n_jobs)
        for m in METRICS:
            all_users[m].append(getattr(rep, m))
        covered = sum(int(np.count_nonzero(mask[ds.user_codes[train_idx]]))
                      for mask in member_masks.values())
        if covered != len(train_idx):
            raise RuntimeError(f"group training sets do not cover the pooled training split in fold {f}")
        for label, _ in partition.groups:
            g = groups[label]
            if g.excluded:
                continue
            if g.n_users == 0:
                g.excluded = "empty group"
                continue
            member = member_masks[label]
            g_test_idx = test_idx[member[ds.user_codes[test_idx]]]
            g_train_idx = train_idx[member[ds.user_codes[train_idx]]]
            if len(g_test_idx) == 0:
                g.excluded = f"no test ratings in fold {f}"
                warnings.append(f"group {label!r} excluded: no test ratings in fold {f}")
                continue
            if len(g_train_idx) == 0:
                g.excluded = f"no training ratings in fold {f}"
                warnings.append(f"group {label!r} excluded: no training ratings in fold {f}")
                continue
            # both arms are scored on this one test set
            g_test = ds.subset(g_test_idx)
            r_pooled = evaluate_model(pooled, g_test, ds, ev, n_jobs=cfg.n_jobs)
            part_model = _fit(ds.subset(g_train_idx), cfg, model_seed)
            r_part = evaluate_model(part_model, g_test, ds, ev, n_jobs=cfg.n_jobs)
            if r_pooled.n_pairs != r_part.n_pairs or r_pooled.n_pairs != len(g_test_idx):
                raise RuntimeError(f"arms saw different test sets for group {label!r}, fold {f}")
            g.test_pairs.append(len(g_test_idx))
            for m in METRICS:
                g.pooled[m].append(getattr(r_pooled, m))
                g.partitioned[m].append(getattr(r_part, m))
            raw_reports[label][0].append(r_pooled)
            raw_reports[label][1].append(r_part)
            if r_pooled.warnings:
                warnings.append(f"fold {f}, group {label!r}: {len(r_pooled.warnings)} users "
                                f"with fewer unrated items than requested for padding")
        log.info("fold %d done", f)

    for label, g in groups.items():
        if g.excluded:
            continue
        if cfg.pairing == "user":
            pairs = _user_metric_pairs(*raw_reports[label])
        else:
            pairs = {m: (g.partitioned[m], g.pooled[m]) for m in METRICS}
        for m in METRICS:
            t, p = paired_t_test(*pairs[m])
            g.tests[m] = MetricTest(m, g.pooled[m], g.partitioned[m], t, p,
                                    bonferroni_adjust(p, len(METRICS)))

    seeds = {"master": cfg.seed, "folds": folds.seed,
             "model": [derive_seed(cfg.seed, "model", f) for f in range(cfg.folds)],
             "padding": [derive_seed(cfg.seed, "padding", f) for f in range(cfg.folds)]}
    return ComparisonReport(
        config=cfg.to_dict(),
        seeds=seeds,
        group_sizes=partition.sizes(),
        all_users=all_users,
        groups=list(groups.values()),
        warnings=warnings,
        notes=list(partition.notes),
    )
