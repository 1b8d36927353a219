"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--users 400] [--items 400] [--repeat 3]

Each kernel runs on the same synthetic data under both backends; outputs are
checked for bit equality before timings are reported.
"""

import argparse
import time

import numpy as np

from dispocf import kernels
from dispocf.models import SvdParams, fit_svd
from dispocf.models.knn import similarity_matrix
from dispocf.synthetic import generate_synthetic, two_population_config


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def aggregate_inputs(ds, n_queries, rng):
    sim = similarity_matrix(ds, "user")
    csr = ds.csr("item")
    items = rng.integers(0, ds.n_items, n_queries)
    starts, ends = csr.indptr[items], csr.indptr[items + 1]
    take = np.concatenate([np.arange(s, e) for s, e in zip(starts, ends)])
    seg_ptr = np.concatenate(([0], np.cumsum(ends - starts))).astype(np.int64)
    rows = rng.integers(0, ds.n_users, n_queries).astype(np.int64)
    return (sim, rows, seg_ptr, csr.indices[take].astype(np.int64), csr.data[take], ds.per_user_mean, 20, 1)


def _equal(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=200, help="users per population")
    ap.add_argument("--items", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=5)
    args = ap.parse_args()

    ds = generate_synthetic(two_population_config(n_users=args.users, n_items=args.items, seed=0))
    print(f"data: {ds.n_users} users, {ds.n_items} items, {len(ds)} ratings")
    names = kernels.available()
    if "cython" not in names:
        print("compiled kernels not built; only the python backend is timed")
    agg = aggregate_inputs(ds, 5000, np.random.default_rng(0))

    cases = {
        "msd_rows (user axis)": lambda: similarity_matrix(ds, "user"),
        "knn_aggregate (5000 queries)": lambda: kernels.get().knn_aggregate(*agg),
        f"sgd_epoch x{args.epochs}": lambda: fit_svd(ds, SvdParams(n_epochs=args.epochs)).user_factors,
    }
    print(f"{'kernel':32s}" + "".join(f"{n:>12s}" for n in names) + "   speedup  equal")
    for label, fn in cases.items():
        timings, outputs = [], []
        for name in names:
            with kernels.using(name):
                t, out = best_of(fn, args.repeat)
            timings.append(t)
            outputs.append(out)
        same = all(_equal(o, outputs[0]) for o in outputs)
        speed = f"{timings[0] / timings[-1]:9.1f}x" if len(timings) > 1 else "        -"
        print(f"{label:32s}" + "".join(f"{t * 1e3:10.1f}ms" for t in timings) + f" {speed}  {same}")


if __name__ == "__main__":
    main()
