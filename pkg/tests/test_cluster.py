import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ferryfuel.cluster import (compare_partitions, cruise_cluster, elbow_curve, elbow_k,
                               find_modes, fit_kmeans, fit_pca, inertia, inverse_transform,
                               kmeans_pp, lloyd, transform)
from ferryfuel.errors import KTooLarge, TooManyComponents
from ferryfuel.telemetry import DEFAULT_DROP, drop_columns


def _blobs(rng, n=200, sep=10.0):
    a = rng.normal(size=(n, 3))
    b = rng.normal(size=(n, 3)) + sep
    return np.vstack([a, b]), np.repeat([0, 1], n)


def test_pca_matches_svd(rng):
    X = rng.normal(size=(100, 5)) @ rng.normal(size=(5, 5))
    p = fit_pca(X)
    s = np.linalg.svd(X - X.mean(axis=0), compute_uv=False)
    np.testing.assert_allclose(p.explained_variance, s**2 / 99, rtol=1e-10)


def test_pca_component_limit(rng):
    p = fit_pca(rng.normal(size=(20, 3)))
    with pytest.raises(TooManyComponents):
        transform(p, rng.normal(size=(2, 3)), 4)


def test_pca_reduced_reconstruction_is_projection(rng):
    X = rng.normal(size=(50, 4))
    p = fit_pca(X)
    S = transform(p, X, 2)
    R = inverse_transform(p, S)
    np.testing.assert_allclose(transform(p, R, 2), S, atol=1e-10)


def test_inertia_definition(rng):
    X = rng.normal(size=(30, 2))
    C = X[:3]
    lab = np.argmin(((X[:, None] - C) ** 2).sum(-1), axis=1)
    assert inertia(X, C, lab) == pytest.approx(((X - C[lab]) ** 2).sum())


def test_lloyd_fixed_point(rng):
    X, _ = _blobs(rng)
    C, lab, inr, _, _ = lloyd(X, X[[0, -1]])
    for j in range(2):
        np.testing.assert_allclose(C[j], X[lab == j].mean(axis=0))
    assert inr == pytest.approx(inertia(X, C, lab))


def test_kmeans_deterministic(rng):
    X, _ = _blobs(rng)
    a = fit_kmeans(X, 3, seed=5)
    b = fit_kmeans(X, 3, seed=5)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    assert a.inertia == b.inertia


def test_kmeans_rejects_large_k(rng):
    with pytest.raises(KTooLarge):
        fit_kmeans(rng.normal(size=(3, 2)), 4)


def test_kmeans_pp_picks_rows(rng):
    X = rng.normal(size=(40, 2))
    C = kmeans_pp(X, 4, np.random.default_rng(0))
    assert all(any(np.array_equal(c, x) for x in X) for c in C)


def test_elbow_curve_non_increasing(rng):
    X = rng.normal(size=(150, 3))
    curve = elbow_curve(X, 5, n_restarts=3)
    vals = [v for _, v in curve]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_elbow_k_largest_relative_drop():
    assert elbow_k([(1, 100.0), (2, 20.0), (3, 15.0), (4, 12.0)]) == 2
    assert elbow_k([(1, 100.0), (2, 90.0), (3, 10.0)]) == 3


def test_compare_partitions_label_invariant():
    a = np.array([0, 0, 1, 1, 1])
    b = 1 - a
    var_a, mae, var_d = compare_partitions(a, b)
    assert mae == 0.0 and var_d == 0.0
    assert var_a == pytest.approx(a.var())


def test_cruise_cluster_picks_high_pitch():
    labels = np.array([0, 0, 1, 1])
    assert cruise_cluster(labels, np.array([1.0, 2.0, 9.0, 10.0])) == 1


def test_find_modes_recovers_logged_mode(small_dataset):
    d = drop_columns(small_dataset, DEFAULT_DROP)
    modes = find_modes(d, 6, 2, seed=0, k_max=4, n_restarts=3)
    logged = small_dataset.values("OPERATIONAL_MODE").astype(int)
    agreement = np.mean(modes.is_mode1.astype(int) == logged)
    assert max(agreement, 1 - agreement) > 0.85
    assert elbow_k(modes.elbow) == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_pca_scores_uncorrelated(seed):
    X = np.random.default_rng(seed).normal(size=(40, 4))
    p = fit_pca(X)
    S = transform(p, X)
    C = np.cov(S, rowvar=False)
    np.testing.assert_allclose(C - np.diag(np.diag(C)), 0.0, atol=1e-10)
