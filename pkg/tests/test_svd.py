import numpy as np
import pytest

from dispocf import kernels
from dispocf.models import FallbackLevel, SvdModel, SvdParams, fit_svd, predict_svd
from dispocf.models.io import load_model, save_model
from dispocf.models.svd import DivergedError, regularized_loss

from conftest import make_dataset, random_dataset
from oracles import rank2_rows, svd_loss

CONVERGENCE_EPOCHS = 100


def test_zero_model_predicts_mean(toy):
    model = fit_svd(toy, SvdParams(init_std=0.0, n_epochs=0))
    for u in toy.user_ids:
        for i in toy.item_ids:
            assert predict_svd(model, u, i).estimate == toy.global_mean


def test_single_rating_converges(backend):
    ds = make_dataset([("a", "x", 4.5)])
    model = fit_svd(ds, SvdParams(n_epochs=500, seed=1))
    assert abs(model.predict("a", "x").estimate - 4.5) < 0.05


def test_deterministic(toy):
    a = fit_svd(toy, SvdParams(seed=7))
    b = fit_svd(toy, SvdParams(seed=7))
    assert np.array_equal(a.user_factors, b.user_factors)
    assert np.array_equal(a.item_bias, b.item_bias)
    assert a.loss_history == b.loss_history
    c = fit_svd(toy, SvdParams(seed=8))
    assert not np.array_equal(a.user_factors, c.user_factors)


def _manual_model(mu=3.5):
    return SvdModel(SvdParams(n_factors=2), mu, ("u",), ("i",), np.array([0.2]), np.array([-0.1]),
                    np.array([[0.3, 0.5]]), np.array([[0.25, 0.15]]))


def test_prediction_sum():
    # q.p = 0.075 + 0.075
    assert _manual_model().predict("u", "i").estimate == pytest.approx(3.75, abs=1e-12)


def test_prediction_term_dropping():
    m = _manual_model()
    p = m.predict("u", "unknown")
    assert p.estimate == pytest.approx(3.7) and p.fallback_level is FallbackLevel.AXIS_MEAN_ONLY
    p = m.predict("unknown", "i")
    assert p.estimate == pytest.approx(3.4) and p.fallback_level is FallbackLevel.AXIS_MEAN_ONLY
    p = m.predict("x", "y")
    assert p.estimate == 3.5 and p.fallback_level is FallbackLevel.GLOBAL_MEAN


def test_prediction_clamped():
    assert _manual_model(mu=6.0).predict("u", "i").estimate == 5.0


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed, backend):
    rng = np.random.default_rng(seed)
    nf, lr, reg = 4, 1e-3, 0.02
    r, mu = 4.0, 3.2
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
    rel = np.abs(step - expected) / np.maximum(np.abs(expected), 1e-12)
    assert rel.max() < 1e-4


def test_regularized_loss_matches_oracle(toy):
    model = fit_svd(toy, SvdParams(n_epochs=3, n_factors=3))
    total = 0.0
    for rt in toy:
        u, i = model.user_index[rt.user_id], model.item_index[rt.item_id]
        total += svd_loss(rt.value, model.global_mean, model.user_bias[u], model.item_bias[i],
                          model.user_factors[u], model.item_factors[i], 0.02)
    assert regularized_loss(toy, model) == pytest.approx(total, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_loss_decreases_and_fits_rank2(seed):
    ds = make_dataset(rank2_rows(seed))
    model = fit_svd(ds, SvdParams(n_epochs=CONVERGENCE_EPOCHS, seed=seed))
    h = model.loss_history
    assert all(b <= a for a, b in zip(h[:5], h[1:6]))
    est = np.array([model.predict(r.user_id, r.item_id).estimate for r in ds])
    assert np.sqrt(np.mean((est - ds.values) ** 2)) < 0.3


def test_diverges():
    ds = random_dataset(np.random.default_rng(0))
    with pytest.raises(DivergedError):
        fit_svd(ds, SvdParams(learning_rate=50.0, n_epochs=50))


def test_predict_items_bit_equal_predict():
    ds = random_dataset(np.random.default_rng(4))
    model = fit_svd(ds, SvdParams(n_epochs=5))
    items = list(ds.item_ids) + ["zzz"]
    for u in (ds.user_ids[0], "nobody"):
        est, levels = model.predict_items(u, items)
        for k, i in enumerate(items):
            p = model.predict(u, i)
            assert p.estimate == est[k] and p.fallback_level is levels[k]


def test_params_validation():
    with pytest.raises(ValueError):
        SvdParams(n_factors=0)
    with pytest.raises(ValueError):
        SvdParams(learning_rate=0)


def test_save_load_bit_exact(tmp_path, toy):
    model = fit_svd(toy, SvdParams(n_epochs=4))
    save_model(model, tmp_path / "svd.npz")
    again = load_model(tmp_path / "svd.npz")
    assert again.params == model.params
    assert again.loss_history == model.loss_history
    for u in toy.user_ids:
        assert np.array_equal(model.predict_items(u, toy.item_ids)[0], again.predict_items(u, toy.item_ids)[0])
