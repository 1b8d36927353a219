"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py``; the summary lines are written
straight to the terminal even when output capture is on.  Criterion 7 needs
the published ratings file and runs only when ``DISPOCF_FULL_DATA`` points
at it.
"""

import itertools
import os
import time

import numpy as np
import pytest

from dispocf import kernels
from dispocf.cli import main
from dispocf.disposition import (Optimism, PartitionScheme, SchemeVariant, classify_optimism,
                                 negative_fraction, partition_users, profile_users)
from dispocf.evaluation import ndcg_at_k, precision_at_k
from dispocf.experiment import ExperimentConfig, run_partition_experiment
from dispocf.models import KnnParams, SvdParams, fit_knn, fit_svd, predict_knn
from dispocf.ratings import parse_ratings_csv, write_ratings_csv
from dispocf.stats import paired_t_test, t_cdf
from dispocf.synthetic import PopulationSpec, SyntheticConfig, generate_synthetic, two_population_config

from conftest import make_dataset
from oracles import knn_oracle, ndcg_oracle, precision_oracle, rank2_rows, svd_loss, t_cdf_quad

DESK_SEED = 0
SVD_EPOCHS = 100


@pytest.fixture
def gate(capsys):
    """Returns ``check(number, title, ok, started, budget, detail)``."""

    def check(number, title, ok, started, budget, detail=""):
        elapsed = time.perf_counter() - started
        in_time = budget is None or elapsed < budget
        status = "PASS" if ok and in_time else "FAIL"
        limit = f"< {budget:g}s" if budget is not None else "no limit"
        with capsys.disabled():
            print(f"\n[acceptance {number}] {status}  {title}  ({elapsed:.2f}s, budget {limit})"
                  + (f"  {detail}" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"
        assert in_time, f"criterion {number} over budget: {elapsed:.2f}s"

    return check


# 1 -------------------------------------------------------------------------

KNN_TOY = [
    ("u1", "m1", 5.0), ("u1", "m2", 3.0), ("u1", "m3", 4.0), ("u1", "m4", 1.0),
    ("u2", "m1", 4.0), ("u2", "m2", 2.0), ("u2", "m3", 2.5), ("u2", "m4", 1.5),
    ("u3", "m1", 1.0), ("u3", "m2", 4.5), ("u3", "m3", 2.0), ("u3", "m4", 5.0),
    ("u4", "m1", 3.0), ("u4", "m2", 3.5), ("u4", "m3", 4.0), ("u4", "m4", 2.0),
]


@pytest.mark.parametrize("backend_name", kernels.available())
def test_criterion_1_knn_oracle(gate, backend_name):
    start = time.perf_counter()
    ratings = {(u, i): r for u, i, r in KNN_TOY}
    worst = 0.0
    with kernels.using(backend_name):
        model = fit_knn(make_dataset(KNN_TOY), KnnParams())
        for u, i in itertools.product(("u1", "u2", "u3", "u4"), ("m1", "m2", "m3", "m4")):
            expected = min(5.0, max(0.5, knn_oracle(ratings, u, i)))
            worst = max(worst, abs(predict_knn(model, u, i).estimate - expected))
    gate(1, f"KNN vs brute-force oracle, 16 pairs [{backend_name}]", worst <= 1e-9, start, 1.0,
         f"max |diff| = {worst:.2e}")


# 2 -------------------------------------------------------------------------

def test_criterion_2_metric_oracles(gate):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    items = list("abcdef")
    worst = 0.0
    checked = 0
    for _ in range(20):
        gains = rng.integers(0, 2, 6)
        relevance = {it: 1 for it, g in zip(items, gains) if g}
        for perm in itertools.permutations(range(6)):
            ranked = [items[j] for j in perm]
            g = [int(gains[j]) for j in perm]
            for k in (3, 6, 8):
                worst = max(worst, abs(ndcg_at_k(ranked, relevance, k) - ndcg_oracle(g, k)),
                            abs(precision_at_k(ranked, set(relevance), k) - precision_oracle(g, k)))
            checked += 1
    gate(2, "NDCG/precision vs exhaustive oracle (720 perms x 20 draws)", checked == 14400 and worst < 1e-12,
         start, 5.0, f"max |diff| = {worst:.2e}")


# 3 -------------------------------------------------------------------------

def test_criterion_3_svd_numerics(gate):
    start = time.perf_counter()
    # (a) gradient direction
    rng = np.random.default_rng(3)
    nf, lr, reg, r, mu = 5, 1e-3, 0.02, 4.5, 3.1
    worst_rel = 0.0
    for _ in range(10):
        bu, bi = rng.normal(0, 0.3, 1), rng.normal(0, 0.3, 1)
        p, q = rng.normal(0, 0.3, (1, nf)), rng.normal(0, 0.3, (1, nf))
        theta = np.concatenate([bu, bi, p[0], q[0]])

        def loss(t):
            return svd_loss(r, mu, t[0], t[1], t[2:2 + nf], t[2 + nf:], reg)

        h = 1e-6
        grad = np.array([(loss(theta + h * e) - loss(theta - h * e)) / (2 * h) for e in np.eye(len(theta))])
        one = np.zeros(1, dtype=np.int64)
        kernels.get().sgd_epoch(one, one, np.array([r]), one, mu, bu, bi, p, q, lr, reg)
        step = np.concatenate([bu, bi, p[0], q[0]]) - theta
        expected = -0.5 * lr * grad
        worst_rel = max(worst_rel, float(np.max(np.abs(step - expected) / np.abs(expected))))
    # (b) and (c) on a seeded 20 x 20 rank-2 matrix
    ds = make_dataset(rank2_rows(3))
    model = fit_svd(ds, SvdParams(n_epochs=SVD_EPOCHS, seed=3))
    h5 = model.loss_history[:6]
    monotone = all(b <= a for a, b in zip(h5, h5[1:]))
    est = np.array([model.predict(x.user_id, x.item_id).estimate for x in ds])
    train_rmse = float(np.sqrt(np.mean((est - ds.values) ** 2)))
    ok = worst_rel < 1e-4 and monotone and train_rmse < 0.3
    gate(3, "SVD gradient / monotone loss / train RMSE", ok, start, 10.0,
         f"grad rel err {worst_rel:.1e}, first 5 epochs non-increasing={monotone}, "
         f"train rmse {train_rmse:.3f} after {SVD_EPOCHS} epochs")


# 4 -------------------------------------------------------------------------

def test_criterion_4_statistics(gate):
    start = time.perf_counter()
    t, p = paired_t_test([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    worst = 0.0
    for df in range(2, 31):
        for x in np.linspace(-10, 10, 81):
            worst = max(worst, abs(t_cdf(float(x), df) - t_cdf_quad(float(x), df)))
    ok = abs(t - 4.2426) < 1e-4 and abs(p - 0.0132) < 1e-3 and worst < 1e-6
    gate(4, "paired t-test example and t-CDF grid vs quadrature", ok, start, 5.0,
         f"t={t:.4f} p={p:.4f}, grid max |diff| = {worst:.1e}")


# 5 -------------------------------------------------------------------------

def _random_config(rng, seed):
    pops = []
    n_items = int(rng.integers(20, 60))
    for k in range(int(rng.integers(1, 4))):
        lo = int(rng.integers(1, 8))
        pops.append(PopulationSpec(f"p{k}", int(rng.integers(1, 12)), lo, lo + int(rng.integers(0, 10)),
                                   float(rng.uniform(1.0, 4.8)), float(rng.uniform(0.2, 1.5)),
                                   float(rng.uniform(0, 0.5))))
    return SyntheticConfig(tuple(pops), n_items, seed)


def test_criterion_5_partition_properties(gate):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    bad = []
    for n in range(200):
        ds = generate_synthetic(_random_config(rng, n))
        threshold = float(rng.uniform(0.05, 0.95)) if n % 2 else 0.30
        profiles = profile_users(ds, threshold)
        for variant in SchemeVariant:
            for sep in (False, True):
                part = partition_users(profiles, PartitionScheme(variant, threshold, sep))
                members = [u for _, m in part.groups for u in m]
                if len(members) != len(set(members)) or set(members) != set(ds.user_ids):
                    bad.append((n, variant.value))
    boundary = classify_optimism(negative_fraction([3.0] * 3 + [4.0] * 7)) is Optimism.OPTIMISTIC
    boundary &= classify_optimism(0.30) is Optimism.OPTIMISTIC
    gate(5, "partitions disjoint and exhaustive on 200 synthetic datasets; 0.30 -> optimistic",
         not bad and boundary, start, 10.0, f"violations={len(bad)}")


# 6 -------------------------------------------------------------------------

def test_criterion_6_desk_scale_direction(gate):
    start = time.perf_counter()
    ds = generate_synthetic(two_population_config(seed=DESK_SEED))
    report = run_partition_experiment(ds, ExperimentConfig(seed=DESK_SEED))
    g = report.group("pessimistic")
    rmse_pool, rmse_part = g.pooled["rmse"], g.partitioned["rmse"]
    ndcg_pool, ndcg_part = g.pooled["ndcg"], g.partitioned["ndcg"]
    wins = sum(rq < rp and nq > np_ for rp, rq, np_, nq in zip(rmse_pool, rmse_part, ndcg_pool, ndcg_part))
    detail = (f"pessimistic group ({g.n_users} users): {wins}/5 folds with lower rmse and higher ndcg@8; "
              f"means rmse {np.mean(rmse_pool):.3f}->{np.mean(rmse_part):.3f}, "
              f"ndcg {np.mean(ndcg_pool):.3f}->{np.mean(ndcg_part):.3f}")
    gate(6, "desk-scale Binary user-KNN direction", wins >= 4, start, 120.0, detail)


# 7 -------------------------------------------------------------------------

REFERENCE_PESSIMISTIC = {"ndcg": 0.332, "precision": 0.323, "rmse": 0.901}


@pytest.mark.network
@pytest.mark.skipif(not os.environ.get("DISPOCF_FULL_DATA"), reason="DISPOCF_FULL_DATA not set")
def test_criterion_7_full_reproduction(gate):
    start = time.perf_counter()
    with open(os.environ["DISPOCF_FULL_DATA"], encoding="utf-8") as fh:
        ds = parse_ratings_csv(fh)
    report = run_partition_experiment(ds, ExperimentConfig(seed=DESK_SEED, n_jobs=os.cpu_count() or 1))
    g = report.group("pessimistic")
    ok = all(g.tests[m].improved and g.tests[m].p_adjusted < 0.05 for m in ("ndcg", "precision"))
    gaps = {m: g.tests[m].partitioned_mean - REFERENCE_PESSIMISTIC[m] for m in REFERENCE_PESSIMISTIC}
    detail = ", ".join(f"{m} {g.tests[m].partitioned_mean:.3f} (p_adj {g.tests[m].p_adjusted:.3g}, "
                       f"vs reference {gaps[m]:+.3f})" for m in REFERENCE_PESSIMISTIC)
    gate(7, "full-data Binary user-KNN pessimistic improvement", ok, start, 7200.0, detail)


# 8 -------------------------------------------------------------------------

def test_criterion_8_determinism(gate, tmp_path):
    start = time.perf_counter()
    src = tmp_path / "ratings.csv"
    with open(src, "w", encoding="utf-8") as fh:
        write_ratings_csv(generate_synthetic(two_population_config(seed=DESK_SEED)), fh)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        rc = main(["experiment", "--input", str(src), "--seed", str(DESK_SEED), "--out", str(out)])
        outs.append((rc, {p.name: p.read_bytes() for p in sorted(out.iterdir())}))
    (rc_a, files_a), (rc_b, files_b) = outs
    ok = rc_a == rc_b == 0 and len(files_a) == 3 and files_a == files_b
    gate(8, "experiment command twice gives byte-identical reports", ok, start, None,
         f"{len(files_a)} files compared")
