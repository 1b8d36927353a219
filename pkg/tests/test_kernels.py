import numpy as np
import pytest

from dispocf import kernels
from dispocf.models import KnnMode, KnnParams, SvdParams, fit_knn, fit_svd
from dispocf.models.knn import similarity_matrix

from conftest import random_dataset

needs_cython = pytest.mark.skipif("cython" not in kernels.available(), reason="compiled kernels not built")


def test_backend_selection():
    assert "python" in kernels.available()
    assert kernels.get("python").NAME == "python"
    with pytest.raises(ValueError):
        kernels.get("fortran")
    with kernels.using("python"):
        assert kernels.get().NAME == "python"


@needs_cython
@pytest.mark.parametrize("mode", ["user", "item"])
@pytest.mark.parametrize("seed", range(4))
def test_msd_rows_bit_equal(mode, seed):
    ds = random_dataset(np.random.default_rng(seed), n_users=30, n_items=25)
    a = similarity_matrix(ds, mode, backend="python")
    b = similarity_matrix(ds, mode, backend="cython")
    assert np.array_equal(a, b)
    assert np.array_equal(a, a.T)
    assert np.all((a >= 0) & (a <= 1))


@needs_cython
@pytest.mark.parametrize("max_k, min_k", [(1, 1), (3, 1), (5, 3), (40, 2)])
def test_knn_aggregate_bit_equal(max_k, min_k):
    rng = np.random.default_rng(max_k * 10 + min_k)
    n = 30
    # few distinct similarity values so ties are common
    sim = rng.choice([0.0, 0.25, 0.5, 1 / 3, 0.8], size=(n, n))
    nq = 50
    lens = rng.integers(0, 12, nq)
    seg_ptr = np.concatenate(([0], np.cumsum(lens))).astype(np.int64)
    nbr_idx = rng.integers(0, n, seg_ptr[-1]).astype(np.int64)
    nbr_vals = rng.integers(1, 11, seg_ptr[-1]) / 2
    means = rng.uniform(1, 5, n)
    rows = rng.integers(0, n, nq).astype(np.int64)
    py = kernels.get("python").knn_aggregate(sim, rows, seg_ptr, nbr_idx, nbr_vals, means, max_k, min_k)
    cy = kernels.get("cython").knn_aggregate(sim, rows, seg_ptr, nbr_idx, nbr_vals, means, max_k, min_k)
    assert np.array_equal(py[0], cy[0])
    assert np.array_equal(py[1], cy[1])


@needs_cython
def test_sgd_and_dot_bit_equal():
    ds = random_dataset(np.random.default_rng(3), n_users=25, n_items=20)
    params = SvdParams(n_factors=6, n_epochs=7, seed=4)
    a = fit_svd(ds, params, backend="python")
    b = fit_svd(ds, params, backend="cython")
    for name in ("user_bias", "item_bias", "user_factors", "item_factors", "loss_history"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name
    p, q = a.user_factors[0], a.item_factors[1]
    assert kernels.get("python").predict_dot(p, q) == kernels.get("cython").predict_dot(p, q)


@pytest.mark.parametrize("mode", list(KnnMode))
def test_parallel_similarity_equals_serial(mode, backend):
    ds = random_dataset(np.random.default_rng(8), n_users=600, n_items=40, density=0.1)
    serial = fit_knn(ds, KnnParams(mode=mode))
    parallel = fit_knn(ds, KnnParams(mode=mode), n_jobs=4)
    assert np.array_equal(serial.similarity, parallel.similarity)
