"""End-to-end run orchestration with per-stage artifacts under ``runs/<run-id>/``."""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from . import __version__, artifacts
from .cluster import ModeClustering, compare_partitions, elbow_k, find_modes
from .errors import FerryFuelError
from .evaluate import (EvalReport, SearchSpace, compare, importance_table,
                       prediction_histogram, random_search)
from .features import FEATURE_NAMES, FeatureFrame, engineer, read_frame, select_features, write_frame
from .models import KINDS, save_model
from .preprocess import SplitIndices, impute, iqr_filter, split, split_by_trip
from .synthgen import RouteSpec, ScenarioSeed, VesselPhysics
from .telemetry import DEFAULT_DROP, Dataset, drop_columns, load_csv

log = logging.getLogger(__name__)

# exit codes for stage failures
STAGES = {
    "load": 10,
    "cluster": 11,
    "impute": 12,
    "features": 13,
    "outliers": 14,
    "split": 15,
    "train": 16,
    "evaluate": 17,
}


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.code = STAGES[stage]
        self.cause = cause


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    input: Optional[str] = None
    runs_dir: str = "runs"
    run_id: Optional[str] = None
    # scenario, used by ``generate``
    physics: dict = field(default_factory=dict)
    route: dict = field(default_factory=dict)
    scenario: dict = field(default_factory=dict)
    missing_rate: float = 0.001
    missing_seed: int = 1
    # preprocessing
    drop: tuple = DEFAULT_DROP
    n_pcs: int = 6
    k: int = 2
    k_max: int = 6
    iqr_factor: float = 1.5
    n_bins: int = 100
    features: str = "all"
    correlation_threshold: float = 0.5
    collinearity_threshold: float = 0.9
    ratio: float = 0.7
    folds: int = 10
    split_by_trip: bool = False
    seed: int = 0
    # models
    kinds: tuple = KINDS
    hyperparams: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    search_samples: int = 10
    # evaluation
    horizon: int = 5
    jobs: int = 1

    def validate(self) -> "PipelineConfig":
        unknown = [k for k in self.kinds if k not in KINDS]
        if unknown:
            raise ConfigError(f"unknown model kinds: {unknown}")
        if not self.kinds:
            raise ConfigError("no model kinds configured")
        if not 0 < self.ratio < 1:
            raise ConfigError("ratio must lie in (0, 1)")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.features not in ("all", "select"):
            bad = [n for n in self.feature_list() if n not in FEATURE_NAMES]
            if bad:
                raise ConfigError(f"unknown features: {bad}")
        for kind in list(self.hyperparams) + list(self.search):
            if kind not in KINDS:
                raise ConfigError(f"hyperparameters given for unknown kind {kind!r}")
        try:
            self.scenario_objects()
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad scenario: {e}") from None
        return self

    def feature_list(self) -> tuple:
        if self.features in ("all", "select"):
            return FEATURE_NAMES
        return tuple(s.strip() for s in self.features.split(",") if s.strip())

    def scenario_objects(self):
        route = dict(self.route)
        for key in ("dock_a", "dock_b"):
            if key in route:
                route[key] = tuple(route[key])
        return VesselPhysics(**self.physics), RouteSpec(**route), ScenarioSeed(**self.scenario)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["drop"] = list(self.drop)
        d["kinds"] = list(self.kinds)
        return d

    def result_hash(self) -> str:
        """Hash of every setting that can change results (paths and worker count excluded)."""
        d = self.to_dict()
        for key in ("input", "runs_dir", "run_id", "jobs"):
            d.pop(key)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


# ------------------------------------------------------------------ config

_SECTION_KEYS = {
    "paths": ("input", "runs_dir", "run_id"),
    "missing": ("missing_rate", "missing_seed"),
    "preprocess": ("drop", "n_pcs", "k", "k_max", "iqr_factor", "n_bins", "features",
                   "correlation_threshold", "collinearity_threshold", "ratio", "folds",
                   "split_by_trip", "seed"),
    "models": ("kinds", "search_samples"),
    "evaluate": ("horizon", "jobs"),
}


def _coerce(name: str, raw: str):
    f = {x.name: x for x in fields(PipelineConfig)}[name]
    default = getattr(PipelineConfig(), name)
    if name in ("drop", "kinds"):
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
        return low in ("1", "true", "yes", "on")
    if isinstance(default, int) and f.type in ("int", int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip() or None


def _json_value(section, key, raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        raise ConfigError(f"[{section}] {key}: not a JSON value: {raw!r}") from None


def load_config(path=None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Read an INI file, apply ``overrides`` (flags win) and validate.

    Sections: ``[paths]``, ``[scenario]``, ``[physics]``, ``[route]``,
    ``[missing]``, ``[preprocess]``, ``[models]``, ``[evaluate]``, plus
    ``[hyperparams.<kind>]`` and ``[search.<kind>]`` whose values are JSON.
    """
    cfg = PipelineConfig()
    values = {}
    if path is not None:
        cp = configparser.ConfigParser()
        try:
            if not cp.read(path):
                raise ConfigError(f"cannot read config {path}")
        except configparser.Error as e:
            raise ConfigError(str(e)) from None
        for section in cp.sections():
            items = dict(cp.items(section))
            try:
                if section in _SECTION_KEYS:
                    for key, raw in items.items():
                        if key not in _SECTION_KEYS[section]:
                            raise ConfigError(f"[{section}] unknown key {key!r}")
                        values[key] = _coerce(key, raw)
                elif section in ("scenario", "physics", "route"):
                    values[section] = {k: _json_value(section, k, v) for k, v in items.items()}
                elif section.startswith("hyperparams."):
                    values.setdefault("hyperparams", {})[section.split(".", 1)[1]] = {
                        k: _json_value(section, k, v) for k, v in items.items()}
                elif section.startswith("search."):
                    values.setdefault("search", {})[section.split(".", 1)[1]] = {
                        k: _json_value(section, k, v) for k, v in items.items()}
                else:
                    raise ConfigError(f"unknown section [{section}]")
            except ValueError as e:
                raise ConfigError(f"[{section}] {e}") from None
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    try:
        cfg = replace(cfg, **values)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    return cfg.validate()


# ------------------------------------------------------------------ stages

def _stage(name):
    def wrap(fn):
        def run(*a, **kw):
            try:
                return fn(*a, **kw)
            except (FerryFuelError, ValueError, FloatingPointError, np.linalg.LinAlgError,
                    OSError, KeyError) as e:
                raise StageError(name, e) from e
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


@_stage("load")
def stage_load(cfg: PipelineConfig) -> Dataset:
    if not cfg.input:
        raise FileNotFoundError("no input CSV configured")
    return load_csv(cfg.input)


@_stage("cluster")
def stage_cluster(d: Dataset, cfg: PipelineConfig):
    """Drop the unused channels, then find the cruise mode by PCA + K-means."""
    kept = drop_columns(d, [c for c in cfg.drop if c in d])
    modes = find_modes(kept, cfg.n_pcs, cfg.k, cfg.seed, k_max=cfg.k_max)
    return kept, modes


@_stage("impute")
def stage_impute(d: Dataset, modes: ModeClustering, cfg: PipelineConfig):
    imputed = impute(d, modes.labels, cfg.n_bins)
    pos = np.searchsorted(d.index, imputed.index)
    mode1 = imputed.index[modes.labels[pos] == modes.mode1_label]
    return imputed, mode1


@_stage("features")
def stage_features(imputed: Dataset, mode1_index, cfg: PipelineConfig):
    """Engineer on every imputed row (so distances see their predecessor), keep cruise rows."""
    frame = engineer(imputed)
    frame = frame.take(np.flatnonzero(np.isin(frame.source_index, mode1_index)))
    spec = None
    if cfg.features == "select":
        spec = select_features(frame, cfg.correlation_threshold, cfg.collinearity_threshold)
        names = spec.selected
    else:
        names = cfg.feature_list()
    return frame.select(names), spec


@_stage("outliers")
def stage_outliers(frame: FeatureFrame, cfg: PipelineConfig):
    keep, masks = iqr_filter(np.column_stack([frame.X, frame.y]), cfg.iqr_factor)
    return frame.take(np.flatnonzero(keep)), masks


@_stage("split")
def stage_split(frame: FeatureFrame, cfg: PipelineConfig) -> SplitIndices:
    if cfg.split_by_trip:
        return split_by_trip(frame.trip, cfg.ratio, cfg.folds, cfg.seed)
    return split(frame.n_rows, cfg.ratio, cfg.folds, cfg.seed)


@_stage("train")
def stage_search(frame: FeatureFrame, sp: SplitIndices, cfg: PipelineConfig):
    """Random search for every kind with a ``[search.<kind>]`` block; returns tuned hyperparameters."""
    from .preprocess import fit_normalizer
    tuned, tables = dict(cfg.hyperparams), {}
    if not cfg.search:
        return tuned, tables
    X = fit_normalizer(frame.X[sp.train]).apply(frame.X)
    for kind, cand in cfg.search.items():
        if kind not in cfg.kinds:
            continue
        space = SearchSpace({k: list(v) for k, v in cand.items()}, cfg.search_samples, cfg.seed)
        best, table = random_search(kind, space, sp, X, frame.y, base=cfg.hyperparams.get(kind),
                                    seed=cfg.seed, n_jobs=cfg.jobs)
        tuned[kind] = best
        tables[kind] = table
    return tuned, tables


@_stage("evaluate")
def stage_compare(frame: FeatureFrame, sp: SplitIndices, hyperparams: dict,
                  cfg: PipelineConfig) -> EvalReport:
    return compare(list(cfg.kinds), frame, sp, cfg.horizon, hyperparams=hyperparams,
                   seed=cfg.seed, n_jobs=cfg.jobs)


# ---------------------------------------------------------------- run dirs

def new_run_id(cfg: PipelineConfig) -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    return f"{stamp}-{cfg.result_hash()[:8]}"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Artifact directory plus a manifest that is rewritten after every stage."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.id = cfg.run_id or new_run_id(cfg)
        self.dir = Path(cfg.runs_dir) / self.id
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "run_id": self.id,
            "package_version": __version__,
            "config": cfg.to_dict(),
            "config_hash": cfg.result_hash(),
            "seeds": {"split": cfg.seed, "cluster": cfg.seed, "models": cfg.seed},
            "input_sha256": sha256_file(cfg.input) if cfg.input and Path(cfg.input).exists() else None,
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "stages": {},
            "status": "running",
        }
        self.save()

    def path(self, *parts) -> Path:
        p = self.dir.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def done(self, stage: str, seconds: float, **info):
        self.manifest["stages"][stage] = {"seconds": round(seconds, 5), **info}
        self.save()

    def save(self):
        (self.dir / "manifest.json").write_text(json.dumps(self.manifest, indent=2, sort_keys=True))


def _timed(fn, *a):
    t0 = time.perf_counter()
    out = fn(*a)
    return out, time.perf_counter() - t0


def run_preprocess(cfg: PipelineConfig, run: Run):
    """Load through split. Returns ``(frame, split)`` and writes their artifacts."""
    d, t = _timed(stage_load, cfg)
    run.done("load", t, rows=d.n_rows, columns=d.n_columns)

    (kept, modes), t = _timed(stage_cluster, d, cfg)
    artifacts.save(run.path("clustering.json"), "ferryfuel.clustering", {
        "columns": list(modes.columns), "center": modes.center, "scale": modes.scale,
        "pca": modes.pca.to_dict(), "n_pcs": modes.n_pcs, "kmeans": modes.kmeans.to_dict(),
        "mode1_label": modes.mode1_label})
    info = {"mode1_share": float(modes.is_mode1.mean())}
    if modes.elbow:
        pd.DataFrame(modes.elbow, columns=["k", "inertia"]).to_csv(
            run.path("elbow.csv"), index=False, lineterminator="\n")
        info["elbow_k"] = elbow_k(modes.elbow)
    if "OPERATIONAL_MODE" in kept:
        logged = kept.column("OPERATIONAL_MODE")
        ok = ~logged.missing & np.isin(logged.values, (0.0, 1.0))
        if ok.sum() > 0:
            var_a, mae, var_d = compare_partitions(logged.values[ok].astype(int),
                                                   modes.is_mode1[ok].astype(int))
            info["partition"] = {"variance_logged": var_a, "mae": mae, "variance_diff": var_d}
    run.done("cluster", t, **info)

    (imputed, mode1), t = _timed(stage_impute, kept, modes, cfg)
    run.done("impute", t, rows=imputed.n_rows, mode1_rows=int(mode1.size))

    (frame, spec), t = _timed(stage_features, imputed, mode1, cfg)
    if spec is not None:
        run.path("feature_spec.json").write_text(spec.to_json())
    run.done("features", t, rows=frame.n_rows, features=list(frame.names))

    (frame, masks), t = _timed(stage_outliers, frame, cfg)
    write_frame(frame, run.path("features.csv"))
    run.done("outliers", t, rows=frame.n_rows,
             bounds={n: list(m.bounds(cfg.iqr_factor))
                     for n, m in zip(list(frame.names) + ["sfe"], masks)})

    sp, t = _timed(stage_split, frame, cfg)
    artifacts.save(run.path("split.json"), "ferryfuel.split", sp.to_dict())
    run.done("split", t, train=int(sp.train.size), test=int(sp.test.size), folds=len(sp.folds))
    return frame, sp


def load_preprocessed(run_dir) -> tuple:
    run_dir = Path(run_dir)
    frame = read_frame(run_dir / "features.csv")
    sp = SplitIndices.from_dict(artifacts.load(run_dir / "split.json", "ferryfuel.split"))
    return frame, sp


def write_report(report: EvalReport, frame: FeatureFrame, sp: SplitIndices, run: Run,
                 hyperparams: dict):
    report.to_csv(run.path("report.csv"))
    report.to_json(run.path("report.json"))
    norm = report.normalizer.to_dict() if report.normalizer is not None else None
    preds = {"source_index": frame.source_index}
    X = report.normalizer.apply(frame.X) if report.normalizer is not None else frame.X
    for kind, model in report.models.items():
        save_model(run.path("models", f"{kind}.json"), model,
                   {"normalizer": norm, "horizon": report.horizon})
        preds[kind] = model.predict(X)
        prediction_histogram(frame.y[sp.test], report.predictions[kind]).to_csv(
            run.path("histograms", f"{kind}.csv"), index=False, lineterminator="\n")
    pd.DataFrame(preds).to_csv(run.path("predictions.csv"), index=False,
                               float_format="%.17g", lineterminator="\n")
    imp = importance_table(list(report.models.values()))
    imp.to_csv(run.path("importance.csv"), index_label="feature", lineterminator="\n")
    (run.path("hyperparams.json")).write_text(json.dumps(
        {k: m.hyperparams for k, m in report.models.items()}, indent=2, sort_keys=True))


def run_models(frame: FeatureFrame, sp: SplitIndices, cfg: PipelineConfig, run: Run) -> EvalReport:
    (hp, tables), t = _timed(stage_search, frame, sp, cfg)
    if tables:
        artifacts.save(run.path("search.json"), "ferryfuel.search", tables)
    run.done("search", t, kinds=sorted(tables))
    report, t = _timed(stage_compare, frame, sp, hp, cfg)
    try:
        write_report(report, frame, sp, run, hp)
    except (OSError, ValueError) as e:
        raise StageError("evaluate", e) from e
    run.done("compare", t, kinds=list(cfg.kinds), horizon=cfg.horizon)
    return report


def run_pipeline(cfg: PipelineConfig) -> tuple:
    """Every stage from CSV to report. Returns ``(run, report)``."""
    run = Run(cfg)
    t0 = time.perf_counter()
    try:
        frame, sp = run_preprocess(cfg, run)
        report = run_models(frame, sp, cfg, run)
    except StageError as e:
        run.manifest["status"] = f"failed at {e.stage}"
        run.manifest["error"] = str(e)
        run.save()
        raise
    run.manifest["status"] = "ok"
    run.manifest["total_seconds"] = round(time.perf_counter() - t0, 3)
    run.save()
    return run, report
