"""Vessel telemetry schema, CSV I/O, validation and descriptive statistics.

A :class:`Dataset` is an immutable column-major table. Each column carries a
float array plus a boolean ``missing`` mask, so an absent reading is never
confused with a zero. The ``TIMESTAMP`` column holds minutes since the Unix
epoch and is written to CSV as ISO-8601.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import AllMissingColumn, EmptyFile, MissingColumn, UnknownColumn

TIMESTAMP = "TIMESTAMP"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    unit: str
    kind: str = "measured"  # measured | calculated | target
    description: str = ""


def _engine_pair(stem, unit, desc):
    return [ColumnSpec(stem.format(i=i), unit, "measured", desc.format(i=i)) for i in (1, 2)]


# Channel titles and units of the ferry's logged variables.
CANONICAL_SCHEMA: tuple = tuple(
    [ColumnSpec(TIMESTAMP, "min", "measured", "sample time, 1-minute cadence"),
     ColumnSpec("DEPTH", "m", "measured", "depth of water")]
    + _engine_pair("ENGINE_{i}_FLOWRATE", "l/min", "engine {i} flow rate")
    + _engine_pair("ENGINE_{i}_RATE_A", "l/min", "engine {i} flow rate A")
    + _engine_pair("ENGINE_{i}_TEMP_A", "degC", "engine {i} flow temp A")
    + _engine_pair("ENGINE_{i}_SFC", "kg/h", "engine {i} fuel consumption")
    + [ColumnSpec("HEADING", "deg", "measured", "heading"),
       ColumnSpec("LATITUDE", "deg", "measured", "latitude"),
       ColumnSpec("LONGITUDE", "deg", "measured", "longitude")]
    + _engine_pair("PITCH_{i}", "%", "propeller {i} pitch")
    + _engine_pair("POWER_{i}", "kW", "engine {i} power")
    + [ColumnSpec("RATE_OF_TURN", "deg/s", "measured", "rate of heading turn"),
       ColumnSpec("SOG", "knots", "measured", "speed over ground"),
       ColumnSpec("SOG_LONG", "knots", "measured", "SOG longitudinal speed"),
       ColumnSpec("SOG_TRANS", "knots", "measured", "SOG transverse speed")]
    + _engine_pair("SPEED_{i}", "rpm", "engine {i} speed")
    + [ColumnSpec("STW", "knots", "measured", "speed through water")]
    + _engine_pair("THRUST_{i}", "kN", "engine {i} thrust")
    + _engine_pair("TORQUE_{i}", "kNm", "engine {i} torque")
    + [ColumnSpec("TRACK_MADE_GOOD", "deg", "measured", "track made good"),
       ColumnSpec("WIND_ANGLE", "deg", "measured", "wind angle"),
       ColumnSpec("WIND_SPEED", "knots", "measured", "wind speed"),
       ColumnSpec("WIND_ANGLE_TRUE", "deg", "measured", "adjusted wind angle"),
       ColumnSpec("WIND_SPEED_TRUE", "knots", "measured", "adjusted wind speed"),
       ColumnSpec("OPERATIONAL_MODE", "binary", "measured", "1 cruise / 0 docking"),
       ColumnSpec("TRIP_DURATION", "min", "measured", "minutes since departure"),
       ColumnSpec("CARGO", "kg", "measured", "cargo")]
)

DEFAULT_DROP = ("ENGINE_1_RATE_A", "ENGINE_2_RATE_A", "ENGINE_1_TEMP_A", "ENGINE_2_TEMP_A",
                "WIND_ANGLE_TRUE", "WIND_SPEED_TRUE", "TRACK_MADE_GOOD")

ANGLE_COLUMNS = ("HEADING", "TRACK_MADE_GOOD", "WIND_ANGLE", "WIND_ANGLE_TRUE")
NONNEGATIVE_COLUMNS = ("SOG", "STW", "SPEED_1", "SPEED_2", "WIND_SPEED", "WIND_SPEED_TRUE",
                       "ENGINE_1_FLOWRATE", "ENGINE_2_FLOWRATE", "ENGINE_1_RATE_A",
                       "ENGINE_2_RATE_A", "ENGINE_1_SFC", "ENGINE_2_SFC")
ANGLE_WARN = 360.0
ANGLE_MAX = 366.0


def schema_by_name(schema: Sequence[ColumnSpec] = CANONICAL_SCHEMA) -> dict:
    return {c.name: c for c in schema}


@dataclass(frozen=True)
class Column:
    spec: ColumnSpec
    values: np.ndarray
    missing: np.ndarray

    @property
    def name(self) -> str:
        return self.spec.name

    def with_nan(self) -> np.ndarray:
        """Copy of the values with missing cells as NaN."""
        out = self.values.astype(np.float64, copy=True)
        out[self.missing] = np.nan
        return out


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def make_column(spec: ColumnSpec, values, missing=None) -> Column:
    values = np.asarray(values, dtype=np.float64)
    if missing is None:
        missing = ~np.isfinite(values)
    missing = np.asarray(missing, dtype=bool) | ~np.isfinite(values)
    clean = np.where(missing, 0.0, values)
    return Column(spec, _frozen(clean, np.float64), _frozen(missing, bool))


@dataclass(frozen=True)
class Dataset:
    """Immutable column-major table with per-cell missing markers.

    ``index`` records the source row of every row so provenance survives
    filtering.
    """
    columns: tuple
    index: np.ndarray = field(default=None)

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        lengths = {c.values.shape[0] for c in cols}
        if len(lengths) > 1:
            raise ValueError("all columns must have equal length")
        n = lengths.pop() if lengths else 0
        idx = np.arange(n) if self.index is None else self.index
        if len(idx) != n:
            raise ValueError("index length must match column length")
        object.__setattr__(self, "index", _frozen(idx, np.int64))
        object.__setattr__(self, "_pos", {nm: i for i, nm in enumerate(names)})

    @classmethod
    def from_arrays(cls, data: dict, schema: Sequence[ColumnSpec] = CANONICAL_SCHEMA,
                    index=None) -> "Dataset":
        """Build from ``{name: values}``; NaN marks a missing cell."""
        specs = schema_by_name(schema)
        cols = [make_column(specs.get(k, ColumnSpec(k, "")), v) for k, v in data.items()]
        return cls(tuple(cols), index)

    @property
    def n_rows(self) -> int:
        return int(self.index.shape[0])

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]

    def __contains__(self, name) -> bool:
        return name in self._pos

    def column(self, name: str) -> Column:
        try:
            return self.columns[self._pos[name]]
        except KeyError:
            raise UnknownColumn(name) from None

    def values(self, name: str) -> np.ndarray:
        """Float values of ``name`` with NaN at missing cells."""
        return self.column(name).with_nan()

    def missing_matrix(self) -> np.ndarray:
        return np.column_stack([c.missing for c in self.columns]) if self.columns else \
            np.zeros((self.n_rows, 0), bool)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        cols = tuple(Column(c.spec, _frozen(c.values[rows], np.float64),
                            _frozen(c.missing[rows], bool)) for c in self.columns)
        return Dataset(cols, self.index[rows])

    def replace_column(self, col: Column) -> "Dataset":
        cols = list(self.columns)
        cols[self._pos[col.name]] = col
        return Dataset(tuple(cols), self.index)

    def equals(self, other: "Dataset") -> bool:
        """Cell-for-cell equality including missing markers."""
        if self.names != other.names or self.n_rows != other.n_rows:
            return False
        for a, b in zip(self.columns, other.columns):
            if not np.array_equal(a.missing, b.missing):
                return False
            if not np.array_equal(a.values[~a.missing], b.values[~b.missing]):
                return False
        return True


# ---------------------------------------------------------------- CSV

def _parse_timestamps(raw: pd.Series) -> np.ndarray:
    ts = pd.to_datetime(raw.where(raw.str.strip() != ""), errors="coerce", format="ISO8601")
    out = np.full(len(raw), np.nan)
    ok = ts.notna().to_numpy()
    out[ok] = ts[ok].to_numpy(dtype="datetime64[s]").astype(np.int64) / 60.0
    return out


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return np.nan


def _parse_floats(raw: pd.Series) -> np.ndarray:
    # exact shortest-repr parsing; pandas' fast path can be off by one ulp
    text = raw.str.strip().replace("", "nan").to_numpy(dtype=str)
    try:
        return text.astype(np.float64)
    except ValueError:
        return np.array([_to_float(t) for t in text], dtype=np.float64)


def load_csv(path, schema: Sequence[ColumnSpec] = CANONICAL_SCHEMA) -> Dataset:
    """Read a telemetry CSV into a :class:`Dataset` ordered like ``schema``.

    Empty strings, ``NaN`` and anything unparseable become missing cells.
    Columns in the file but not in the schema are ignored.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if path.stat().st_size == 0:
        raise EmptyFile(f"{path} is empty")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False)
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"{path} has no header") from None
    header = [h.strip() for h in df.columns]
    df.columns = header
    absent = [c.name for c in schema if c.name not in header]
    if absent:
        raise MissingColumn(f"{path}: missing columns {absent}")
    cols = []
    for spec in schema:
        raw = df[spec.name]
        if spec.name == TIMESTAMP:
            vals = _parse_timestamps(raw)
        else:
            vals = _parse_floats(raw)
        cols.append(make_column(spec, vals))
    return Dataset(tuple(cols))


def format_timestamps(minutes: np.ndarray, missing: np.ndarray) -> list:
    secs = np.round(np.where(missing, 0.0, minutes) * 60.0).astype("int64")
    iso = np.datetime_as_string(secs.astype("datetime64[s]"), unit="s")
    return ["" if m else s for s, m in zip(iso, missing)]


def to_frame(d: Dataset) -> pd.DataFrame:
    data = {}
    for c in d.columns:
        if c.name == TIMESTAMP:
            data[c.name] = format_timestamps(c.values, c.missing)
        else:
            data[c.name] = c.with_nan()
    return pd.DataFrame(data)


def write_csv(d: Dataset, path) -> Path:
    """Write ``d``; missing cells become empty strings and floats round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    to_frame(d).to_csv(path, index=False, na_rep="", lineterminator="\n")
    return path


# ---------------------------------------------------------------- transforms

def drop_columns(d: Dataset, names: Iterable[str]) -> Dataset:
    names = list(names)
    unknown = [n for n in names if n not in d]
    if unknown:
        raise UnknownColumn(f"unknown columns {unknown}")
    gone = set(names)
    return Dataset(tuple(c for c in d.columns if c.name not in gone), d.index)


# ---------------------------------------------------------------- statistics

@dataclass(frozen=True)
class ColumnStats:
    name: str
    mean: float
    std_dev: float
    min: float
    max: float
    median: float
    target_correlation: float
    mae_cross_correlation: float


def pairwise_pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation over rows where both values are present."""
    ok = np.isfinite(a) & np.isfinite(b)
    if ok.sum() < 2:
        return float("nan")
    x = a[ok] - a[ok].mean()
    y = b[ok] - b[ok].mean()
    den = np.sqrt((x @ x) * (y @ y))
    if den == 0:
        return float("nan")
    return float(np.clip((x @ y) / den, -1.0, 1.0))


def correlation_matrix(cols: Sequence[np.ndarray]) -> np.ndarray:
    k = len(cols)
    R = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            R[i, j] = R[j, i] = pairwise_pearson(cols[i], cols[j])
    return R


def column_stats(d: Dataset, target: str, columns: Optional[Sequence[str]] = None) -> list:
    """Summary statistics per column, Pearson correlation with ``target`` and
    the mean absolute correlation with the other non-target columns.

    ``std_dev`` is the sample (n-1) estimate.
    """
    names = list(columns) if columns is not None else [n for n in d.names if n != TIMESTAMP]
    if target not in d:
        raise UnknownColumn(target)
    if target not in names:
        names.append(target)
    arrays = {n: d.values(n) for n in names}
    for n, a in arrays.items():
        if not np.isfinite(a).any():
            raise AllMissingColumn(n)
    R = correlation_matrix([arrays[n] for n in names])
    t = names.index(target)
    others = [i for i in range(len(names)) if i != t]
    out = []
    for i, n in enumerate(names):
        a = arrays[n]
        v = a[np.isfinite(a)]
        std = float(v.std(ddof=1)) if v.size > 1 else 0.0
        corr = 1.0 if i == t else R[i, t]
        peers = [abs(R[i, j]) for j in others if j != i and np.isfinite(R[i, j])]
        mae = float(np.mean(peers)) if (i != t and peers) else float("nan")
        out.append(ColumnStats(n, float(v.mean()), std, float(v.min()), float(v.max()),
                               float(np.median(v)), float(corr), mae))
    return out


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    row: int
    column: str
    rule: str
    severity: str  # "reject" or "warn"
    value: float


def validate(d: Dataset) -> list:
    """Every invariant breach as a :class:`Violation`; empty iff the data is clean."""
    found = []

    def flag(name, mask, rule, severity):
        col = d.column(name)
        for r in np.flatnonzero(mask & ~col.missing):
            found.append(Violation(int(r), name, rule, severity, float(col.values[r])))

    for name in ANGLE_COLUMNS:
        if name in d:
            v = d.column(name).values
            flag(name, (v < 0) | (v > ANGLE_MAX), "angle_out_of_range", "reject")
            flag(name, (v > ANGLE_WARN) & (v <= ANGLE_MAX), "angle_above_360", "warn")
    if "OPERATIONAL_MODE" in d:
        v = d.column("OPERATIONAL_MODE").values
        flag("OPERATIONAL_MODE", (v != 0) & (v != 1), "mode_not_binary", "reject")
    for name in NONNEGATIVE_COLUMNS:
        if name in d:
            flag(name, d.column(name).values < 0, "negative_value", "reject")
    order = {n: i for i, n in enumerate(d.names)}
    found.sort(key=lambda v: (v.row, order[v.column], v.rule))
    return found
