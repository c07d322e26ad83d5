import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ferryfuel.errors import DegenerateDistance, EmptySelection, MissingSourceColumn
from ferryfuel.features import (DEGENERATE_DISTANCE, FEATURE_NAMES, MISSING_SOURCE,
                                NO_PREVIOUS_FIX, OK, FeatureFrame, engineer, engineer_rows,
                                headwind, read_frame, select_features, sfe, traveled_distance,
                                trip_ids, write_frame)
from ferryfuel.telemetry import Dataset, drop_columns


def test_headwind_examples():
    assert headwind(0.0, 0.0, 10.0) == pytest.approx(10.0)
    assert headwind(90.0, 0.0, 10.0) == pytest.approx(0.0, abs=1e-12)
    assert headwind(180.0, 0.0, 10.0) == pytest.approx(-10.0)


def test_distance_and_sfe():
    assert traveled_distance(3e-3, 4e-3) == pytest.approx(5e-3)
    assert sfe(100.0, 300.0, 0.01) == pytest.approx(20000.0)
    with pytest.raises(DegenerateDistance):
        sfe(1.0, 1.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 360), st.floats(0, 360), st.floats(0, 50))
def test_headwind_bounded_by_wind_speed(a, t, v):
    assert abs(headwind(a, t, v)) <= v + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-5, 1.0), st.floats(0, 1e4), st.floats(0, 1e4), st.floats(1.5, 4.0))
def test_sfe_inversely_proportional_to_distance(d, a, b, k):
    assert sfe(a, b, d) == pytest.approx(k * sfe(a, b, k * d), rel=1e-12)


def test_engineer_matches_hand_computation(small_dataset):
    f = engineer(small_dataset)
    i = 10
    src = int(f.source_index[i])
    v = small_dataset.values
    dlat = v("LATITUDE")[src] - v("LATITUDE")[src - 1]
    dlon = v("LONGITUDE")[src] - v("LONGITUDE")[src - 1]
    d = math.hypot(dlat, dlon)
    assert f.column("traveled_distance")[i] == pytest.approx(d, rel=1e-14)
    assert f.y[i] == pytest.approx((v("ENGINE_1_SFC")[src] + v("ENGINE_2_SFC")[src]) / (2 * d),
                                   rel=1e-12)
    assert f.column("mean_pitch")[i] == pytest.approx(0.5 * (v("PITCH_1")[src] + v("PITCH_2")[src]))
    assert f.column("sog_minus_stw")[i] == pytest.approx(v("SOG")[src] - v("STW")[src])
    assert f.names == FEATURE_NAMES and np.isfinite(f.X).all()


def test_first_row_of_each_trip_has_no_distance(small_dataset):
    X, y, reason, trip = engineer_rows(small_dataset)
    starts = np.flatnonzero(np.diff(np.concatenate([[-1], trip])) != 0)
    assert (reason[starts] == NO_PREVIOUS_FIX).all()
    assert np.isnan(y[starts]).all()
    assert trip.max() >= 10


def test_reason_codes(small_dataset):
    v = {n: small_dataset.values(n).copy() for n in small_dataset.names}
    v["STW"][20] = np.nan
    v["LATITUDE"][31] = v["LATITUDE"][30]
    v["LONGITUDE"][31] = v["LONGITUDE"][30]
    d = Dataset.from_arrays(v)
    _, _, reason, _ = engineer_rows(d)
    assert reason[20] == MISSING_SOURCE
    assert reason[31] == DEGENERATE_DISTANCE
    assert reason[25] == OK


def test_missing_source_column(small_dataset):
    with pytest.raises(MissingSourceColumn):
        engineer(drop_columns(small_dataset, ["HEADING"]))


def test_trip_ids_split_on_time_gap():
    d = Dataset.from_arrays({"TIMESTAMP": np.array([0, 1, 2, 30, 31.0])})
    assert trip_ids(d).tolist() == [0, 0, 0, 1, 1]


def test_frame_csv_round_trip(small_dataset, tmp_path):
    f = engineer(small_dataset)
    write_frame(f, tmp_path / "f.csv")
    g = read_frame(tmp_path / "f.csv")
    assert g.names == f.names
    np.testing.assert_array_equal(g.X, f.X)
    np.testing.assert_array_equal(g.y, f.y)
    np.testing.assert_array_equal(g.source_index, f.source_index)


def test_select_features_drops_collinear_copy(rng):
    n = 500
    a = rng.normal(size=n)
    b = a + 1e-3 * rng.normal(size=n)
    c = rng.normal(size=n)
    y = 2 * a + 0.7 * c + 0.01 * rng.normal(size=n)
    noise = rng.normal(size=n)
    f = FeatureFrame(np.column_stack([b, a, c, noise]), y, ("f1", "f2", "f3", "f4"))
    spec = select_features(f, correlation_threshold=0.2)
    assert len(set(spec.selected) & {"f1", "f2"}) == 1
    assert "f3" in spec.selected and "f4" not in spec.selected


def test_select_features_empty(rng):
    f = FeatureFrame(rng.normal(size=(200, 2)), rng.normal(size=200), ("a", "b"))
    with pytest.raises(EmptySelection):
        select_features(f, correlation_threshold=0.9)
