import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ferryfuel.errors import DimensionMismatch
from ferryfuel.models import (DEFAULT_HYPERPARAMS, KINDS, expand_poly2, fit_linear, fit_model,
                              fit_tree, layer_sizes, load_model, loss_and_grad, param_count,
                              poly2_param_count, save_model)
from ferryfuel.models.ensemble import fit_adaboost, fit_forest, fit_gbm, fit_xgb
from ferryfuel.models.mlp import fit_mlp, init_params
from ferryfuel.models.tree import grow_gradient_tree, presort


def _data(rng, n=300, d=4):
    X = rng.normal(size=(n, d))
    y = np.sin(X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.normal(size=n)
    return X, y


# ------------------------------------------------------------------ linear

def test_ridge_matches_closed_form(rng):
    X = rng.normal(size=(80, 5))
    y = rng.normal(size=80)
    lam = 3.0
    Xc, yc = X - X.mean(0), y - y.mean()
    w = np.linalg.solve(Xc.T @ Xc + lam * np.eye(5), Xc.T @ yc)
    fit = fit_linear(X, y, ridge=lam)
    np.testing.assert_allclose(fit.w, w, rtol=1e-9, atol=1e-12)
    assert fit.w0 == pytest.approx(y.mean() - X.mean(0) @ w)


def test_lasso_kkt_conditions(rng):
    X = rng.normal(size=(200, 6))
    y = X @ np.array([2.0, -1.0, 0.0, 0.0, 0.5, 0.0]) + 0.3 * rng.normal(size=200)
    alpha = 0.05
    fit = fit_linear(X, y, lasso=alpha, tol=1e-12)
    r = y - fit.predict(X)
    grad = X.T @ r / len(y)
    active = fit.w != 0
    np.testing.assert_allclose(grad[active], alpha * np.sign(fit.w[active]), atol=1e-7)
    assert np.all(np.abs(grad[~active]) <= alpha + 1e-9)


def test_rank_deficient_ols_gives_min_norm(rng):
    a = rng.normal(size=50)
    X = np.column_stack([a, a, rng.normal(size=50)])
    y = 3 * a + rng.normal(size=50)
    fit = fit_linear(X, y)
    assert fit.w[0] == pytest.approx(fit.w[1], rel=1e-6)
    ref = np.linalg.lstsq(np.column_stack([np.ones(50), X]), y, rcond=None)[0]
    np.testing.assert_allclose(fit.predict(X), np.column_stack([np.ones(50), X]) @ ref, atol=1e-8)


def test_poly2_expansion_order():
    E = expand_poly2(np.array([[2.0, 3.0]]))
    assert E.tolist() == [[2.0, 3.0, 4.0, 6.0, 9.0]]
    assert poly2_param_count(2) == 6


def test_linear_dimension_check(rng):
    fit = fit_linear(rng.normal(size=(10, 2)), rng.normal(size=10))
    with pytest.raises(DimensionMismatch):
        fit.predict(np.zeros((1, 3)))


# ------------------------------------------------------------------- trees

def test_tree_fits_step_exactly():
    X = np.arange(10.0)[:, None]
    y = np.where(X[:, 0] < 4.5, 1.0, 5.0)
    t = fit_tree(X, y, {"max_depth": 1})
    assert t.feature[0] == 0 and t.threshold[0] == 4.5
    np.testing.assert_array_equal(t.predict(X), y)


def test_tree_min_samples_leaf(rng):
    X, y = _data(rng)
    t = fit_tree(X, y, {"max_depth": 20, "min_samples_leaf": 15})
    leaves = t.left == -1
    assert t.n_samples[leaves].min() >= 15


def test_tree_constant_target_is_single_leaf(rng):
    t = fit_tree(rng.normal(size=(30, 3)), np.full(30, 2.5))
    assert t.left.size == 1 and t.value[0] == 2.5


def test_tree_weights_equal_repeated_rows(rng):
    X, y = _data(rng, n=60)
    c = rng.integers(1, 4, size=60).astype(float)
    a = fit_tree(X, y, {"max_depth": 4}, counts=c)
    b = fit_tree(np.repeat(X, c.astype(int), axis=0), np.repeat(y, c.astype(int)), {"max_depth": 4})
    np.testing.assert_array_equal(a.feature, b.feature)
    np.testing.assert_allclose(a.predict(X), b.predict(X), rtol=1e-10)


def test_xgb_leaf_weight_formula(rng):
    X = rng.normal(size=(40, 2))
    y = rng.normal(size=40)
    lam = 2.0
    t = grow_gradient_tree(presort(X), -y, np.ones(40), max_depth=0, reg_lambda=lam, half=0.5)
    assert t.value[0] == pytest.approx(y.sum() / (40 + lam))


def test_xgb_gamma_prunes(rng):
    X, y = _data(rng)
    hp = {"max_depth": 6, "gamma": 1e9, "reg_lambda": 1.0}
    m = fit_xgb(X, y, hp, n_estimators=3)
    assert all(t.left.size == 1 for t in m.trees)


# --------------------------------------------------------------- ensembles

def test_forest_is_member_average(rng):
    X, y = _data(rng)
    f = fit_forest(X, y, {"max_depth": 5}, n_trees=7, seed=1)
    np.testing.assert_allclose(f.predict(X), f.predict_members(X).mean(axis=0))


def test_forest_jobs_do_not_change_result(rng):
    X, y = _data(rng)
    a = fit_forest(X, y, {"max_depth": 5, "max_features": "sqrt"}, n_trees=6, seed=2)
    b = fit_forest(X, y, {"max_depth": 5, "max_features": "sqrt"}, n_trees=6, seed=2, n_jobs=3)
    np.testing.assert_array_equal(a.predict(X), b.predict(X))


def test_adaboost_prediction_is_member_prediction(rng):
    X, y = _data(rng)
    m = fit_adaboost(X, y, {"max_depth": 3, "learning_rate": 0.5}, n_estimators=8, seed=0)
    members = np.stack([t.predict(X) for t in m.trees])
    pred = m.predict(X)
    assert all(p in members[:, i] for i, p in enumerate(pred))


def test_boosting_train_error_decreases(rng):
    X, y = _data(rng)
    g = fit_gbm(X, y, {"max_depth": 3, "learning_rate": 0.1, "subsample": 1.0}, 30, seed=0)
    x = fit_xgb(X, y, {"max_depth": 3, "learning_rate": 0.1, "reg_lambda": 1.0}, 30, seed=0)
    for m in (g, x):
        assert all(b <= a + 1e-12 for a, b in zip(m.train_rmse, m.train_rmse[1:]))


# --------------------------------------------------------------------- mlp

def test_mlp_layer_sizes():
    assert layer_sizes(10) == [10, 30, 20, 1]
    assert param_count([2, 3, 1]) == 2 * 3 + 3 + 3 + 1


@pytest.mark.parametrize("activation", ["logistic", "tanh", "relu", "identity"])
def test_mlp_gradient_all_activations(activation, rng):
    sizes = [3, 5, 4, 1]
    params = init_params(sizes, rng, activation)
    params = [p + 0.1 * rng.normal(size=p.shape) for p in params]
    X = rng.normal(size=(12, 3))
    y = rng.normal(size=12)
    _, grads = loss_and_grad(params, X, y, activation)
    h = 1e-6
    for k, p in enumerate(params):
        for idx in list(np.ndindex(p.shape))[:5]:
            old = p[idx]
            p[idx] = old + h
            lp, _ = loss_and_grad(params, X, y, activation)
            p[idx] = old - h
            lm, _ = loss_and_grad(params, X, y, activation)
            p[idx] = old
            num = (lp - lm) / (2 * h)
            assert grads[k][idx] == pytest.approx(num, rel=1e-4, abs=1e-8)


def test_mlp_learns_smooth_function(rng):
    X = rng.uniform(-2, 2, size=(600, 2))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1]
    net = fit_mlp(X, y, epochs=300, learning_rate=1e-2, seed=0)
    assert np.sqrt(np.mean((net.predict(X) - y) ** 2)) < 0.1


# ---------------------------------------------------------- common facade

SMALL = {
    "decision_tree": {"max_depth": 6},
    "random_forest": {"n_estimators": 5, "max_depth": 6},
    "adaboost": {"n_estimators": 5, "max_depth": 4},
    "gradient_boosting": {"n_estimators": 5, "max_depth": 4},
    "xgb": {"n_estimators": 5, "max_depth": 4},
    "mlp": {"epochs": 20},
}


@pytest.mark.parametrize("kind", KINDS)
def test_every_kind_fits_saves_and_reloads(kind, rng, tmp_path):
    X, y = _data(rng, n=200, d=3)
    m = fit_model(kind, X, y, SMALL.get(kind), seed=4, feature_names=("a", "b", "c"))
    pred = m.predict(X)
    assert pred.shape == (200,) and np.isfinite(pred).all()
    save_model(tmp_path / "m.json", m)
    back, raw = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(back.predict(X), pred)
    assert back.feature_names == ("a", "b", "c")
    again = fit_model(kind, X, y, SMALL.get(kind), seed=4)
    np.testing.assert_array_equal(again.predict(X), pred)


def test_default_hyperparams_cover_kinds():
    assert set(DEFAULT_HYPERPARAMS) == set(KINDS)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_tree_prediction_within_target_range(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(40, 3))
    y = r.normal(size=40)
    p = fit_tree(X, y, {"max_depth": 5}).predict(r.normal(size=(20, 3)))
    assert y.min() - 1e-12 <= p.min() and p.max() <= y.max() + 1e-12
