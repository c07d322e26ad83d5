import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ferryfuel.errors import EmptyFile, MissingColumn, UnknownColumn
from ferryfuel.telemetry import (CANONICAL_SCHEMA, DEFAULT_DROP, TIMESTAMP, Dataset, column_stats,
                                 drop_columns, load_csv, pairwise_pearson, validate, write_csv)


def test_csv_round_trip_is_exact(small_dataset, tmp_path):
    p = write_csv(small_dataset, tmp_path / "a.csv")
    back = load_csv(p)
    assert back.equals(small_dataset)
    write_csv(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_missing_cells_survive_round_trip(small_csv):
    d = load_csv(small_csv)
    assert d.missing_matrix().sum() > 0
    assert not d.column(TIMESTAMP).missing.any()


def test_missing_header_column(tmp_path, small_dataset):
    p = write_csv(drop_columns(small_dataset, ["STW"]), tmp_path / "x.csv")
    with pytest.raises(MissingColumn):
        load_csv(p)


def test_empty_file(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(EmptyFile):
        load_csv(p)


def test_drop_columns_default_list(small_dataset):
    out = drop_columns(small_dataset, DEFAULT_DROP)
    assert out.n_columns == small_dataset.n_columns - 7
    assert not any(c in out for c in DEFAULT_DROP)
    with pytest.raises(UnknownColumn):
        drop_columns(small_dataset, ["NOPE"])


def test_take_keeps_provenance(small_dataset):
    sub = small_dataset.take([5, 2, 9])
    assert sub.index.tolist() == [5, 2, 9]
    assert sub.values("STW")[1] == small_dataset.values("STW")[2]


def test_column_stats_match_numpy(small_dataset):
    stats = {s.name: s for s in column_stats(small_dataset, "ENGINE_1_SFC", ["STW", "SOG"])}
    stw = small_dataset.values("STW")
    assert stats["STW"].mean == pytest.approx(stw.mean(), rel=1e-12)
    assert stats["STW"].std_dev == pytest.approx(stw.std(ddof=1), rel=1e-12)
    r = np.corrcoef(stw, small_dataset.values("ENGINE_1_SFC"))[0, 1]
    assert stats["STW"].target_correlation == pytest.approx(r, abs=1e-12)
    assert stats["ENGINE_1_SFC"].target_correlation == 1.0


def test_validate_flags_bad_values(small_dataset):
    assert validate(small_dataset) == []
    heading = small_dataset.values("HEADING").copy()
    heading[3] = 400.0
    heading[4] = 362.0
    bad = Dataset.from_arrays({"HEADING": heading})
    found = validate(bad)
    assert [(v.row, v.severity) for v in found] == [(3, "reject"), (4, "warn")]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40))
def test_pearson_bounded(xs):
    a = np.array(xs)
    b = a[::-1].copy()
    r = pairwise_pearson(a, b)
    assert np.isnan(r) or -1.0 <= r <= 1.0


def test_schema_has_every_column():
    names = [c.name for c in CANONICAL_SCHEMA]
    assert names[0] == TIMESTAMP and len(names) == len(set(names)) == 36
