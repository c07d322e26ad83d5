import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ferryfuel.errors import TooFewRows, TooFewValues
from ferryfuel.preprocess import (SplitIndices, column_mode, fit_normalizer, impute, iqr_filter,
                                  iqr_mask, n_train_rows, split, split_by_trip)
from ferryfuel.telemetry import Dataset


def test_iqr_quartiles_linear_interpolation():
    m = iqr_mask(np.arange(1.0, 9.0))
    assert (m.q1, m.q3) == (2.75, 6.25)


def test_iqr_ignores_missing_and_needs_four():
    m = iqr_mask([1.0, 2.0, np.nan, 3.0, 4.0, 100.0])
    assert m.keep.tolist() == [True, True, False, True, True, False]
    with pytest.raises(TooFewValues):
        iqr_mask([1.0, 2.0, np.nan])


def test_iqr_filter_intersects_columns():
    X = np.column_stack([np.r_[np.arange(20.0), 500.0], np.r_[900.0, np.arange(20.0)]])
    keep, _ = iqr_filter(X)
    assert not keep[0] and not keep[-1] and keep[1:-1].all()


def test_column_mode_exact_and_binned():
    assert column_mode([3.0, 1.0, 3.0, 1.0, 2.0]) == 1.0
    v = np.r_[np.full(50, 0.55), np.linspace(0.0, 10.0, 20) + 0.013]
    assert abs(column_mode(v, 100) - 0.55) <= 0.1


def test_impute_fills_single_gaps_within_cluster():
    a = np.array([1.0, 1.0, np.nan, 5.0, 5.0, np.nan, 9.0])
    b = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, np.nan])
    ts = np.arange(7.0)
    d = Dataset.from_arrays({"TIMESTAMP": ts, "A": a, "B": b})
    labels = np.array([0, 0, 0, 1, 1, 1, 1])
    out = impute(d, labels)
    assert out.n_rows == 7
    np.testing.assert_array_equal(out.values("A"), [1, 1, 1, 5, 5, 5, 9])
    assert out.values("B")[6] == 0.0


def test_impute_drops_rows_missing_two_cells():
    d = Dataset.from_arrays({"TIMESTAMP": np.arange(3.0), "A": [1.0, np.nan, 2.0],
                             "B": [1.0, np.nan, 2.0]})
    out = impute(d, np.zeros(3, int))
    assert out.index.tolist() == [0, 2]


def test_normalizer_uses_training_statistics(rng):
    X = rng.normal(3.0, 2.0, size=(100, 3))
    X[:, 2] = 7.0
    n = fit_normalizer(X)
    Z = n.apply(X)
    np.testing.assert_allclose(Z[:, :2].mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(Z[:, :2].std(axis=0), 1.0, atol=1e-12)
    np.testing.assert_array_equal(Z[:, 2], 7.0)
    np.testing.assert_allclose(n.inverse(Z), X)


def test_split_deterministic_and_serialisable():
    a = split(1000, seed=3)
    b = SplitIndices.from_dict(a.to_dict())
    np.testing.assert_array_equal(a.train, b.train)
    assert all(np.array_equal(x, y) for x, y in zip(a.folds, b.folds))
    with pytest.raises(TooFewRows):
        split(5, k=10)


def test_split_by_trip_keeps_trips_whole():
    trips = np.repeat(np.arange(30), 17)
    sp = split_by_trip(trips, seed=1)
    assert not set(trips[sp.train]) & set(trips[sp.test])
    assert sum(len(f) for f in sp.folds) == sp.train.size


@settings(max_examples=60, deadline=None)
@given(st.integers(200, 3000), st.floats(0.05, 0.95), st.integers(0, 99))
def test_split_partition_property(n, ratio, seed):
    sp = split(n, ratio, 10, seed)
    assert sp.train.size == n_train_rows(n, ratio)
    assert np.array_equal(np.sort(np.r_[sp.train, sp.test]), np.arange(n))
    folds = np.concatenate(sp.folds)
    assert np.array_equal(np.sort(folds), sp.train)
    sizes = [len(f) for f in sp.folds]
    assert max(sizes) - min(sizes) <= 1
