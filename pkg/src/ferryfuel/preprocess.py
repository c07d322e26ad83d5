"""Outlier masking, within-cluster imputation, normalization and splitting."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCluster, TooFewRows, TooFewValues
from .telemetry import TIMESTAMP, Dataset, make_column

log = logging.getLogger(__name__)

N_BINS = 100


# ----------------------------------------------------------------- outliers

@dataclass(frozen=True)
class OutlierMask:
    keep: np.ndarray
    q1: float
    q3: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    def bounds(self, factor: float = 1.5):
        return self.q1 - factor * self.iqr, self.q3 + factor * self.iqr


def iqr_mask(column, factor: float = 1.5) -> OutlierMask:
    """Keep values inside ``[q1 - factor*iqr, q3 + factor*iqr]``.

    Quartiles interpolate linearly between order statistics (numpy's
    default). Missing values are never kept.
    """
    v = np.asarray(column, dtype=np.float64)
    ok = np.isfinite(v)
    if ok.sum() < 4:
        raise TooFewValues("IQR rule needs at least 4 values")
    q1, q3 = np.percentile(v[ok], [25.0, 75.0])
    lo, hi = q1 - factor * (q3 - q1), q3 + factor * (q3 - q1)
    return OutlierMask(ok & (v >= lo) & (v <= hi), float(q1), float(q3))


def iqr_filter(X, factor: float = 1.5):
    """Row mask that passes every column of ``X``, plus the per-column masks."""
    X = np.asarray(X, dtype=np.float64)
    masks = [iqr_mask(X[:, j], factor) for j in range(X.shape[1])]
    keep = np.logical_and.reduce([m.keep for m in masks]) if masks else np.ones(len(X), bool)
    return keep, masks


# --------------------------------------------------------------- imputation

def _is_integral(v: np.ndarray) -> bool:
    return bool(np.all(v == np.round(v)))


def column_mode(v, n_bins: int = N_BINS) -> float:
    """Most frequent value; for non-integral data the centre of the fullest histogram bin.

    Exact-mode ties go to the smallest value; bin ties to the lowest bin.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise EmptyCluster("no observed values")
    if _is_integral(v):
        vals, counts = np.unique(v, return_counts=True)
        return float(vals[np.argmax(counts)])
    lo, hi = float(v.min()), float(v.max())
    counts, edges = np.histogram(v, bins=n_bins, range=(lo, hi))
    b = int(np.argmax(counts))
    return float(0.5 * (edges[b] + edges[b + 1]))


def impute(d: Dataset, assignments, n_bins: int = N_BINS) -> Dataset:
    """Fill rows that miss exactly one cell with that column's within-cluster mode.

    Rows missing two or more cells are removed, as are rows missing a
    timestamp and rows whose cluster has no observed value for the gap.
    Observed cells are never changed.
    """
    labels = np.asarray(assignments)
    if labels.shape[0] != d.n_rows:
        raise ValueError("assignments must align with dataset rows")
    M = d.missing_matrix()
    n_missing = M.sum(axis=1)
    drop = n_missing >= 2
    if TIMESTAMP in d:
        drop |= d.column(TIMESTAMP).missing
    names = d.names
    cols = list(d.columns)
    for j, name in enumerate(names):
        need = np.flatnonzero(M[:, j] & ~drop)
        if need.size == 0:
            continue
        col = cols[j]
        values = col.values.copy()
        missing = col.missing.copy()
        for lab in np.unique(labels[need]):
            rows = need[labels[need] == lab]
            observed = col.values[(labels == lab) & ~col.missing]
            if observed.size == 0:
                log.warning("cluster %s has no observed %s; removing %d rows", lab, name, rows.size)
                drop[rows] = True
                continue
            values[rows] = column_mode(observed, n_bins)
            missing[rows] = False
        cols[j] = make_column(col.spec, values, missing)
    if drop.any():
        log.info("impute: removed %d of %d rows", int(drop.sum()), d.n_rows)
    out = Dataset(tuple(cols), d.index)
    return out.take(np.flatnonzero(~drop))


# ------------------------------------------------------------ normalization

@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray
    passthrough: np.ndarray  # True where the training column was constant

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.where(self.passthrough, X, (X - self.mean) / np.where(self.passthrough, 1.0, self.std))

    def inverse(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        return np.where(self.passthrough, Z, Z * self.std + self.mean)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "passthrough": self.passthrough}

    @staticmethod
    def from_dict(d: dict) -> "Normalizer":
        return Normalizer(np.asarray(d["mean"], float), np.asarray(d["std"], float),
                          np.asarray(d["passthrough"], bool))


def fit_normalizer(X) -> Normalizer:
    """Per-column training mean and population standard deviation."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    flat = ~(std > 0)
    return Normalizer(mean, np.where(flat, 1.0, std), flat)


# ---------------------------------------------------------------- splitting

@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    folds: tuple

    def fold_train(self, i: int) -> np.ndarray:
        return np.setdiff1d(self.train, self.folds[i], assume_unique=True)

    def to_dict(self) -> dict:
        return {"train": self.train, "test": self.test, "folds": list(self.folds)}

    @staticmethod
    def from_dict(d: dict) -> "SplitIndices":
        return SplitIndices(np.asarray(d["train"], np.int64), np.asarray(d["test"], np.int64),
                            tuple(np.asarray(f, np.int64) for f in d["folds"]))


def n_train_rows(n_rows: int, ratio: float) -> int:
    """``round(ratio * n)`` with halves rounded up."""
    return int(np.floor(ratio * n_rows + 0.5))


def split(n_rows: int, ratio: float = 0.7, k: int = 10, seed: int = 0) -> SplitIndices:
    """Random train/test partition plus ``k`` validation folds over the training rows."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    n_train = n_train_rows(n_rows, ratio)
    if n_rows < k or n_train < k:
        raise TooFewRows(f"{n_rows} rows cannot supply {k} folds")
    perm = np.random.default_rng(seed).permutation(n_rows)
    train = perm[:n_train]
    folds = tuple(np.sort(f) for f in np.array_split(train, k))
    return SplitIndices(np.sort(train), np.sort(perm[n_train:]), folds)


def split_by_trip(trips, ratio: float = 0.7, k: int = 10, seed: int = 0) -> SplitIndices:
    """Whole trips go to one side; trips are added to training until it holds ``round(ratio*n)`` rows.

    Folds are likewise unions of whole trips.
    """
    trips = np.asarray(trips)
    uniq = np.unique(trips)
    if uniq.size < k + 1:
        raise TooFewRows(f"{uniq.size} trips cannot supply {k} folds and a test set")
    rng = np.random.default_rng(seed)
    order = rng.permutation(uniq)
    sizes = np.array([(trips == t).sum() for t in order])
    target = n_train_rows(trips.size, ratio)
    n_tr = int(np.searchsorted(np.cumsum(sizes), target)) + 1
    n_tr = min(max(n_tr, k), uniq.size - 1)
    train_trips = order[:n_tr]
    train = np.flatnonzero(np.isin(trips, train_trips))
    test = np.flatnonzero(~np.isin(trips, train_trips))
    folds = tuple(np.flatnonzero(np.isin(trips, grp)) for grp in np.array_split(train_trips, k))
    return SplitIndices(train, test, folds)
