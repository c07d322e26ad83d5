"""Engineered model inputs, the fuel-efficiency target and correlation pruning."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DegenerateDistance, EmptySelection, MissingSourceColumn, TooFewRows
from .telemetry import TIMESTAMP, Dataset, pairwise_pearson

log = logging.getLogger(__name__)

D_MIN = 1e-6
TRIP_GAP_MINUTES = 10.0
COLLINEARITY_THRESHOLD = 0.9
CORRELATION_THRESHOLD = 0.5

FEATURE_NAMES = (
    "mean_pitch", "engine_mean_speed", "stw", "mean_torque", "wind_angle",
    "headwind", "heading", "sog", "sog_minus_stw", "traveled_distance",
)
TARGET = "sfe"

# column headers used when a frame is written to disk
LABELS = {
    "mean_pitch": "Mean pitch",
    "engine_mean_speed": "Engine mean speed",
    "stw": "Speed through water",
    "mean_torque": "Mean torque",
    "wind_angle": "Wind angle",
    "headwind": "Headwind speed",
    "heading": "Heading",
    "sog": "Speed over ground",
    "sog_minus_stw": "Water current effect",
    "traveled_distance": "Traveled distance",
    "sfe": "Fuel efficiency",
}
_FROM_LABEL = {v: k for k, v in LABELS.items()}

SOURCE_COLUMNS = (
    TIMESTAMP, "PITCH_1", "PITCH_2", "SPEED_1", "SPEED_2", "STW", "TORQUE_1", "TORQUE_2",
    "WIND_ANGLE", "WIND_SPEED", "HEADING", "SOG", "LATITUDE", "LONGITUDE",
    "ENGINE_1_SFC", "ENGINE_2_SFC",
)


def headwind(alpha_w, theta, v_w):
    """Wind component along the heading, ``cos(alpha_w - theta) * v_w``."""
    out = np.cos(np.radians(np.asarray(alpha_w, float) - np.asarray(theta, float))) * v_w
    return float(out) if np.ndim(out) == 0 else out


def traveled_distance(dlat, dlon):
    """Planar distance in degrees between consecutive fixes."""
    out = np.hypot(np.asarray(dlat, float), np.asarray(dlon, float))
    return float(out) if np.ndim(out) == 0 else out


def sfe(sfc1, sfc2, d):
    """Fuel per unit distance, ``(sfc1 + sfc2) / (2 d)``, in kg/deg."""
    d_arr = np.asarray(d, float)
    if np.any(~(d_arr > D_MIN)):
        raise DegenerateDistance(f"distance must exceed {D_MIN} deg")
    out = (np.asarray(sfc1, float) + np.asarray(sfc2, float)) / (2.0 * d_arr)
    return float(out) if np.ndim(out) == 0 else out


def trip_ids(d: Dataset) -> np.ndarray:
    """Trip index per row.

    A trip starts where the elapsed-trip counter goes backwards or where
    consecutive timestamps are more than ``TRIP_GAP_MINUTES`` apart.
    """
    n = d.n_rows
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    t = d.values(TIMESTAMP)
    start = np.zeros(n, dtype=bool)
    start[0] = True
    start[1:] |= ~(np.diff(t) <= TRIP_GAP_MINUTES)
    if "TRIP_DURATION" in d:
        dur = d.values("TRIP_DURATION")
        back = np.diff(dur) < 0  # NaN compares False
        start[1:] |= back
    return np.cumsum(start) - 1


@dataclass(frozen=True)
class FeatureFrame:
    """Feature matrix plus target, with provenance back to the source rows."""
    X: np.ndarray
    y: np.ndarray
    names: tuple = FEATURE_NAMES
    source_index: np.ndarray = field(default=None)
    trip: np.ndarray = field(default=None)
    timestamp: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.X.shape[0]
        for attr, dflt in (("source_index", np.arange(n)), ("trip", np.zeros(n, np.int64)),
                           ("timestamp", np.arange(n, dtype=float))):
            if getattr(self, attr) is None:
                object.__setattr__(self, attr, dflt)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.names):
            raise ValueError("X columns must match names")
        for a in (self.y, self.source_index, self.trip, self.timestamp):
            if len(a) != n:
                raise ValueError("FeatureFrame arrays must be row-aligned")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name == TARGET:
            return self.y
        return self.X[:, self.names.index(name)]

    def take(self, rows) -> "FeatureFrame":
        rows = np.asarray(rows)
        return FeatureFrame(self.X[rows], self.y[rows], self.names, self.source_index[rows],
                            self.trip[rows], self.timestamp[rows])

    def select(self, names) -> "FeatureFrame":
        cols = [self.names.index(n) for n in names]
        return FeatureFrame(self.X[:, cols], self.y, tuple(names), self.source_index,
                            self.trip, self.timestamp)

    def with_target(self, y) -> "FeatureFrame":
        return FeatureFrame(self.X, np.asarray(y, float), self.names, self.source_index,
                            self.trip, self.timestamp)

    def with_features(self, X) -> "FeatureFrame":
        return FeatureFrame(np.asarray(X, float), self.y, self.names, self.source_index,
                            self.trip, self.timestamp)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.X, columns=[LABELS.get(n, n) for n in self.names])
        df[LABELS[TARGET]] = self.y
        df.insert(0, "source_index", self.source_index)
        df.insert(1, "trip", self.trip)
        df.insert(2, TIMESTAMP, self.timestamp)
        return df


def write_frame(f: FeatureFrame, path) -> Path:
    path = Path(path)
    f.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_frame(path) -> FeatureFrame:
    df = pd.read_csv(path, float_precision="round_trip")
    fixed = {"source_index", "trip", TIMESTAMP, LABELS[TARGET]}
    names = tuple(_FROM_LABEL.get(c, c) for c in df.columns if c not in fixed)
    labels = [c for c in df.columns if c not in fixed]
    return FeatureFrame(df[labels].to_numpy(float), df[LABELS[TARGET]].to_numpy(float), names,
                        df["source_index"].to_numpy(np.int64), df["trip"].to_numpy(np.int64),
                        df[TIMESTAMP].to_numpy(float))


OK = ""
MISSING_SOURCE = "missing_source_value"
NO_PREVIOUS_FIX = "no_previous_fix"
DEGENERATE_DISTANCE = "degenerate_distance"


def engineer_rows(d: Dataset):
    """Features, target and a reason code for every source row.

    Rows that cannot be engineered carry NaN and a non-empty reason.
    Returns ``(X, y, reason, trip)``.
    """
    absent = [c for c in SOURCE_COLUMNS if c not in d]
    if absent:
        raise MissingSourceColumn(f"missing source columns: {', '.join(absent)}")
    v = {c: d.values(c) for c in SOURCE_COLUMNS}
    n = d.n_rows
    trip = trip_ids(d)

    dist = np.full(n, np.nan)
    if n > 1:
        step = np.diff(v[TIMESTAMP])
        same = (trip[1:] == trip[:-1]) & (np.abs(step - 1.0) < 1e-9)
        dd = traveled_distance(np.diff(v["LATITUDE"]), np.diff(v["LONGITUDE"]))
        dist[1:] = np.where(same, dd, np.nan)
        gap = np.ones(n, bool)
        gap[1:] = ~same
    else:
        gap = np.ones(n, bool)

    cols = {
        "mean_pitch": 0.5 * (v["PITCH_1"] + v["PITCH_2"]),
        "engine_mean_speed": 0.5 * (v["SPEED_1"] + v["SPEED_2"]),
        "stw": v["STW"],
        "mean_torque": 0.5 * (v["TORQUE_1"] + v["TORQUE_2"]),
        "wind_angle": v["WIND_ANGLE"],
        "headwind": headwind(v["WIND_ANGLE"], v["HEADING"], v["WIND_SPEED"]),
        "heading": v["HEADING"],
        "sog": v["SOG"],
        "sog_minus_stw": v["SOG"] - v["STW"],
        "traveled_distance": dist,
    }
    X = np.column_stack([cols[k] for k in FEATURE_NAMES]) if n else np.zeros((0, len(FEATURE_NAMES)))
    own = [c for c in SOURCE_COLUMNS if c not in ("LATITUDE", "LONGITUDE")]
    complete = np.logical_and.reduce([np.isfinite(v[c]) for c in own]) if n else np.zeros(0, bool)
    reason = np.full(n, OK, dtype=object)
    reason[~complete] = MISSING_SOURCE
    reason[(reason == OK) & gap] = NO_PREVIOUS_FIX
    reason[(reason == OK) & ~np.isfinite(X).all(axis=1)] = MISSING_SOURCE
    reason[(reason == OK) & ~(dist > D_MIN)] = DEGENERATE_DISTANCE
    good = reason == OK
    y = np.full(n, np.nan)
    if good.any():
        y[good] = sfe(v["ENGINE_1_SFC"][good], v["ENGINE_2_SFC"][good], dist[good])
    return X, y, reason, trip


def engineer(d: Dataset) -> FeatureFrame:
    """Compute every feature and the target; drop rows where either is undefined.

    Distance is taken between consecutive rows of one trip that are exactly
    one minute apart, so the first row of a trip (and any row after a gap)
    has no distance and is dropped along with rows at ``d <= D_MIN``.
    """
    X, y, reason, trip = engineer_rows(d)
    rows = np.flatnonzero(reason == OK)
    dropped = d.n_rows - rows.size
    if dropped:
        log.info("engineer: dropped %d of %d rows without a defined target", dropped, d.n_rows)
    return FeatureFrame(X[rows], y[rows], FEATURE_NAMES, d.index[rows], trip[rows],
                        d.values(TIMESTAMP)[rows])


@dataclass(frozen=True)
class FeatureSpec:
    selected: tuple
    correlation_threshold: float = CORRELATION_THRESHOLD
    collinearity_threshold: float = COLLINEARITY_THRESHOLD
    target_correlation: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(list(self.selected))

    @staticmethod
    def from_json(text: str, **kw) -> "FeatureSpec":
        return FeatureSpec(tuple(json.loads(text)), **kw)


def _rank(name: str) -> tuple:
    return (FEATURE_NAMES.index(name), "") if name in FEATURE_NAMES else (len(FEATURE_NAMES), name)


def select_features(f: FeatureFrame, correlation_threshold: float = CORRELATION_THRESHOLD,
                    collinearity_threshold: float = COLLINEARITY_THRESHOLD) -> FeatureSpec:
    """Greedy correlation pruning.

    Candidates are visited by descending absolute target correlation (ties
    in canonical feature order). A candidate is kept unless it is collinear
    with an already kept feature; kept features below the target-correlation
    threshold are then removed.
    """
    complete = np.isfinite(f.X).all(axis=1) & np.isfinite(f.y)
    if complete.sum() < 2:
        raise TooFewRows("feature selection needs at least 2 complete rows")
    X, y = f.X[complete], f.y[complete]
    tc = {n: pairwise_pearson(X[:, j], y) for j, n in enumerate(f.names)}
    tc = {n: 0.0 if not np.isfinite(r) else r for n, r in tc.items()}
    order = sorted(f.names, key=lambda n: (-abs(tc[n]), _rank(n)))
    kept = []
    for name in order:
        xj = X[:, f.names.index(name)]
        if all(abs(np.nan_to_num(pairwise_pearson(xj, X[:, f.names.index(k)]))) < collinearity_threshold
               for k in kept):
            kept.append(name)
    kept = [k for k in kept if abs(tc[k]) >= correlation_threshold]
    if not kept:
        raise EmptySelection("no feature passes the correlation thresholds")
    return FeatureSpec(tuple(kept), correlation_threshold, collinearity_threshold, tc)
