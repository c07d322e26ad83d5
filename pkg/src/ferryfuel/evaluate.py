"""Metrics, n-step-ahead evaluation, hyperparameter search and model comparison."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .errors import ConstantTarget, EmptyInput, FerryFuelError, LengthMismatch, TripTooShort
from .features import FeatureFrame
from .models import KINDS, fit_model
from .preprocess import Normalizer, SplitIndices, fit_normalizer

log = logging.getLogger(__name__)

HORIZON = 5


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise LengthMismatch(f"{y.size} observations vs {yhat.size} predictions")
    if y.size == 0:
        raise EmptyInput("metrics need at least one value")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def r2(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    sst = float(((y - y.mean()) ** 2).sum())
    if not sst > 0:
        raise ConstantTarget("R^2 is undefined for a constant target")
    return 1.0 - float(((y - yhat) ** 2).sum()) / sst


# ------------------------------------------------------------- target shift

def shift_positions(f: FeatureFrame, n: int):
    """Rows that have a target ``n`` minutes later in the same trip, and where that target lives."""
    if n < 0:
        raise ValueError("horizon must be >= 0")
    rows = np.arange(f.n_rows)
    if n == 0:
        return rows, rows
    key = f.trip.astype(np.float64) * 1e9 + f.timestamp
    order = np.argsort(key, kind="stable")
    sk = key[order]
    pos = np.searchsorted(sk, key + n)
    pos_c = np.minimum(pos, len(sk) - 1)
    hit = (pos < len(sk)) & (sk[pos_c] == key + n)
    return rows[hit], order[pos_c[hit]]


def shift_target(f: FeatureFrame, n: int) -> FeatureFrame:
    """Pair each row's features with the target observed ``n`` minutes later in its trip.

    Rows with no such future row (the tail of every trip) are dropped; a
    trip that loses every row is reported in the log.
    """
    src, dst = shift_positions(f, n)
    if n > 0:
        lost = np.setdiff1d(np.unique(f.trip), np.unique(f.trip[src]))
        if lost.size:
            log.info("shift_target: %d trips shorter than horizon %d dropped (%s)",
                     lost.size, n, TripTooShort.__name__)
    out = f.take(src)
    return out.with_target(f.y[dst])


# ------------------------------------------------------------------ reports

@dataclass
class EvalRow:
    kind: str
    fit_seconds: float = math.nan
    predict_seconds: float = math.nan
    param_count: Optional[int] = None
    r2_validation: float = math.nan
    r2_test: float = math.nan
    rmse_test: float = math.nan
    future_rmse_test: float = math.nan
    note: str = ""


CSV_COLUMNS = (
    ("kind", "model"),
    ("fit_seconds", "train_time_s"),
    ("predict_seconds", "test_time_s"),
    ("param_count", "n_parameters"),
    ("r2_validation", "r2_validation"),
    ("r2_test", "r2_test"),
    ("rmse_test", "rmse_test"),
    ("future_rmse_test", "future_rmse_test"),
    ("note", "note"),
)
TIMING_COLUMNS = ("train_time_s", "test_time_s")


def _fmt(key, v):
    if v is None:
        return ""
    if key in ("fit_seconds", "predict_seconds"):
        return f"{v:.5f}"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class EvalReport:
    rows: list
    horizon: int = HORIZON
    feature_names: tuple = ()
    models: dict = field(default_factory=dict, repr=False)
    predictions: dict = field(default_factory=dict, repr=False)
    normalizer: Optional[Normalizer] = field(default=None, repr=False)

    def row(self, kind: str) -> EvalRow:
        for r in self.rows:
            if r.kind == kind:
                return r
        raise KeyError(kind)

    def to_csv(self, path=None, *, timing: bool = True) -> str:
        cols = [c for c in CSV_COLUMNS if timing or c[1] not in TIMING_COLUMNS]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([label for _, label in cols])
        for r in self.rows:
            w.writerow([_fmt(k, getattr(r, k)) for k, _ in cols])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_json(self, path=None) -> str:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v
        payload = {"horizon": self.horizon, "feature_names": list(self.feature_names),
                   "rows": [{k: clean(v) for k, v in asdict(r).items()} for r in self.rows]}
        text = json.dumps(payload, indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    @staticmethod
    def from_csv(path) -> "EvalReport":
        df = pd.read_csv(path, keep_default_na=False, float_precision="round_trip")
        back = {label: key for key, label in CSV_COLUMNS}
        rows = []
        for rec in df.to_dict("records"):
            kw = {}
            for label, v in rec.items():
                key = back[label]
                if key == "kind" or key == "note":
                    kw[key] = str(v)
                elif key == "param_count":
                    kw[key] = None if v == "" else int(v)
                else:
                    kw[key] = math.nan if v in ("", "nan") else float(v)
            rows.append(EvalRow(**kw))
        return EvalReport(rows)


def prediction_histogram(y, yhat, bins: int = 50) -> pd.DataFrame:
    """Observed and predicted counts over shared bins."""
    y, yhat = _pair(y, yhat)
    lo = float(min(y.min(), yhat.min()))
    hi = float(max(y.max(), yhat.max()))
    edges = np.linspace(lo, hi if hi > lo else lo + 1.0, bins + 1)
    return pd.DataFrame({"bin_low": edges[:-1], "bin_high": edges[1:],
                         "observed": np.histogram(y, edges)[0],
                         "predicted": np.histogram(yhat, edges)[0]})


# -------------------------------------------------------------- comparison

def _map(fn, items, n_jobs):
    if n_jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _task_seed(seed: int, kind: str) -> int:
    # independent of which other kinds are requested
    return int(np.random.SeedSequence([seed, KINDS.index(kind)]).generate_state(1)[0])


def cross_val_r2(kind, X, y, split: SplitIndices, hp=None, seed=0, n_jobs=1):
    """Validation R^2 per fold; each fold is refit on the remaining training rows.

    ``X`` and ``y`` are indexed by the same row ids as ``split``.
    """
    def one(i):
        val = split.folds[i]
        tr = split.fold_train(i)
        m = fit_model(kind, X[tr], y[tr], hp, seed=seed)
        return r2(y[val], m.predict(X[val]))
    return _map(one, list(range(len(split.folds))), n_jobs)


def compare(kinds, frame: FeatureFrame, split: SplitIndices, horizon: int = HORIZON, *,
            hyperparams: Optional[dict] = None, seed: int = 0, n_jobs: int = 1,
            normalize: bool = True, cv: bool = True) -> EvalReport:
    """Side-by-side comparison of ``kinds`` on one split of ``frame``.

    Features are standardized with training statistics; the target is
    left in kg/deg. The future column trains and tests on the same rows
    with the target moved ``horizon`` minutes ahead.
    """
    hyperparams = hyperparams or {}
    X = frame.X
    norm = fit_normalizer(X[split.train]) if normalize else None
    if norm is not None:
        X = norm.apply(X)
    y = frame.y
    names = frame.names

    in_train = np.zeros(frame.n_rows, bool)
    in_train[split.train] = True
    in_test = np.zeros(frame.n_rows, bool)
    in_test[split.test] = True
    src, dst = shift_positions(frame, horizon)
    fut_train = src[in_train[src]]
    fut_test = src[in_test[src]]
    y_future = np.full(frame.n_rows, np.nan)
    y_future[src] = y[dst]

    tasks = []
    for kind in kinds:
        tasks.append((kind, "test", None))
        if cv:
            tasks.extend((kind, "fold", i) for i in range(len(split.folds)))
        if horizon > 0:
            tasks.append((kind, "future", None))

    def run(task):
        kind, what, i = task
        hp = hyperparams.get(kind)
        s = _task_seed(seed, kind)
        try:
            if what == "fold":
                tr, va = split.fold_train(i), split.folds[i]
                m = fit_model(kind, X[tr], y[tr], hp, seed=s)
                return r2(y[va], m.predict(X[va])), None
            if what == "future":
                m = fit_model(kind, X[fut_train], y_future[fut_train], hp, seed=s)
                return rmse(y_future[fut_test], m.predict(X[fut_test])), None
            m = fit_model(kind, X[split.train], y[split.train], hp, seed=s, feature_names=names)
            pred, m = m.timed_predict(X[split.test])
            return m, pred
        except (FerryFuelError, FloatingPointError, ValueError, np.linalg.LinAlgError) as e:
            log.warning("%s %s failed: %s", kind, what, e)
            return e, None

    results = dict(zip(tasks, _map(run, tasks, n_jobs)))

    report = EvalReport([], horizon, tuple(names), normalizer=norm)
    for kind in kinds:
        row = EvalRow(kind)
        notes = []
        model, pred = results[(kind, "test", None)]
        if isinstance(model, Exception):
            notes.append(f"fit failed: {type(model).__name__}: {model}")
        else:
            row.fit_seconds = model.fit_seconds
            row.predict_seconds = model.predict_seconds
            row.param_count = model.param_count
            row.r2_test = r2(y[split.test], pred)
            row.rmse_test = rmse(y[split.test], pred)
            report.models[kind] = model
            report.predictions[kind] = pred
        if cv:
            scores = [results[(kind, "fold", i)][0] for i in range(len(split.folds))]
            bad = [s for s in scores if isinstance(s, Exception)]
            if bad:
                notes.append(f"{len(bad)} folds failed")
            else:
                row.r2_validation = float(np.mean(scores))
        if horizon > 0:
            fut = results[(kind, "future", None)][0]
            if isinstance(fut, Exception):
                notes.append(f"future fit failed: {type(fut).__name__}")
            else:
                row.future_rmse_test = fut
        else:
            row.future_rmse_test = row.rmse_test
        row.note = "; ".join(notes)
        report.rows.append(row)
    return report


def importance_table(models) -> pd.DataFrame:
    """Rows are features, columns are model kinds; models without importances are left out."""
    cols, names, omitted = {}, None, []
    for m in models:
        if m.feature_importances is None:
            omitted.append(m.kind)
            continue
        imp = np.asarray(m.feature_importances, dtype=np.float64)
        cols[m.kind] = imp
        names = names or m.feature_names or tuple(f"x{i}" for i in range(imp.size))
    if omitted:
        log.info("importance_table: no importances for %s", ", ".join(omitted))
    df = pd.DataFrame(cols, index=list(names) if names else None)
    df.attrs["omitted"] = omitted
    return df


# ------------------------------------------------------------------ search

@dataclass(frozen=True)
class SearchSpace:
    candidates: dict
    n_samples: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.candidates or any(len(v) == 0 for v in self.candidates.values()):
            raise ValueError("every hyperparameter needs at least one candidate")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def grid(self) -> list:
        keys = sorted(self.candidates)
        return [dict(zip(keys, combo)) for combo in
                itertools.product(*(self.candidates[k] for k in keys))]

    def draws(self) -> list:
        """``n_samples`` distinct grid points in seeded random order."""
        g = self.grid()
        take = min(self.n_samples, len(g))
        idx = np.random.default_rng(self.seed).choice(len(g), size=take, replace=False)
        return [g[i] for i in idx]


def random_search(kind, space: SearchSpace, folds: SplitIndices, X, y, *, base=None,
                  seed: int = 0, n_jobs: int = 1):
    """Mean K-fold validation R^2 for each drawn combination; the first best draw wins."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    draws = space.draws()

    def score(params):
        hp = {**(base or {}), **params}
        return cross_val_r2(kind, X, y, folds, hp, seed=seed)

    scores = _map(score, draws, n_jobs)
    table = [{"draw": i, **p, "mean_r2": float(np.mean(s)), "fold_r2": list(map(float, s))}
             for i, (p, s) in enumerate(zip(draws, scores))]
    best = 0
    for i, rec in enumerate(table):
        if rec["mean_r2"] > table[best]["mean_r2"]:
            best = i
    return {**(base or {}), **draws[best]}, table
