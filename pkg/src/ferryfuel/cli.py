"""``ferryfuel`` command line.

Every subcommand reads an optional INI config (``--config``); flags given on
the command line override it. Exit codes: 0 ok, 2 config, 3 schema,
10-17 pipeline stage failures, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import artifacts
from .errors import EmptyFile, FerryFuelError, MissingColumn, SchemaMismatch
from .evaluate import EvalReport, EvalRow, r2, rmse
from .features import FEATURE_NAMES, LABELS, OK, engineer_rows, read_frame
from .models import KINDS, fit_model, load_model, save_model
from .pipeline import (ConfigError, Run, StageError, load_config, load_preprocessed,
                       run_models, run_pipeline, run_preprocess, sha256_file)
from .preprocess import Normalizer, fit_normalizer
from .synthgen import inject_missing, simulate_voyages, write_manifest
from .telemetry import column_stats, load_csv, validate, write_csv

log = logging.getLogger("ferryfuel")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_SCHEMA = 0, 1, 2, 3


def _kinds(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _overrides(args) -> dict:
    keys = ("input", "runs_dir", "run_id", "seed", "horizon", "jobs", "features")
    out = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "kinds", None):
        out["kinds"] = _kinds(args.kinds)
    if getattr(args, "split_by_trip", False):
        out["split_by_trip"] = True
    return out


def _config(args):
    return load_config(args.config, _overrides(args))


# ------------------------------------------------------------------ commands

def cmd_generate(args) -> int:
    cfg = _config(args)
    if args.manifest:
        raw = json.loads(Path(args.manifest).read_text())
        cfg = replace(cfg, physics=raw.get("physics", {}), route=raw.get("route", {}),
                      scenario=raw.get("scenario", {}),
                      missing_rate=raw.get("missing_rate", cfg.missing_rate),
                      missing_seed=raw.get("missing_seed", cfg.missing_seed))
    scenario = dict(cfg.scenario)
    if args.rows is not None:
        scenario["n_rows"] = args.rows
    if args.seed is not None:
        scenario["rng_seed"] = args.seed
    cfg = replace(cfg, scenario=scenario).validate()
    p, r, s = cfg.scenario_objects()
    out = Path(args.output or cfg.input or "telemetry.csv")
    d = inject_missing(simulate_voyages(p, r, s), cfg.missing_rate, cfg.missing_seed)
    write_csv(d, out)
    manifest = Path(str(out) + ".manifest.json")
    write_manifest(manifest, p, r, s, {"missing_rate": cfg.missing_rate,
                                       "missing_seed": cfg.missing_seed, "rows": d.n_rows,
                                       "sha256": sha256_file(out)})
    print(f"wrote {d.n_rows} rows to {out} (manifest {manifest})")
    return EXIT_OK


def cmd_inspect(args) -> int:
    cfg = _config(args)
    d = load_csv(cfg.input)
    target = args.target if args.target in d else "ENGINE_1_SFC"
    stats = column_stats(d, target)
    df = pd.DataFrame([vars(s) for s in stats])
    violations = validate(d)
    text = df.to_csv(index=False, lineterminator="\n")
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    missing = d.missing_matrix()
    print(f"# rows={d.n_rows} columns={d.n_columns} missing_cells={int(missing.sum())} "
          f"rejects={sum(v.severity == 'reject' for v in violations)} "
          f"warnings={sum(v.severity == 'warn' for v in violations)}", file=sys.stderr)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    cfg = _config(args)
    run = Run(cfg)
    frame, sp = run_preprocess(cfg, run)
    print(f"run {run.id}: {frame.n_rows} rows, train {sp.train.size}, test {sp.test.size}")
    return EXIT_OK


def _existing_run(cfg):
    if not cfg.run_id:
        raise ConfigError("--run-id is required to reuse a preprocessed run")
    run_dir = Path(cfg.runs_dir) / cfg.run_id
    if not (run_dir / "features.csv").exists():
        raise ConfigError(f"{run_dir} has no preprocessed features; run `preprocess` first")
    return run_dir


def _reopen(cfg, run_dir):
    run = Run.__new__(Run)
    run.cfg, run.id, run.dir = cfg, cfg.run_id, run_dir
    run.manifest = json.loads((run_dir / "manifest.json").read_text())
    return run


def cmd_train(args) -> int:
    """Fit every configured kind on the training rows of a preprocessed run."""
    cfg = _config(args)
    run_dir = _existing_run(cfg)
    run = _reopen(cfg, run_dir)
    frame, sp = load_preprocessed(run_dir)
    norm = fit_normalizer(frame.X[sp.train])
    X = norm.apply(frame.X)
    from .evaluate import _task_seed
    for kind in cfg.kinds:
        try:
            m = fit_model(kind, X[sp.train], frame.y[sp.train], cfg.hyperparams.get(kind),
                          seed=_task_seed(cfg.seed, kind), feature_names=frame.names)
        except (FerryFuelError, ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
            raise StageError("train", e) from e
        save_model(run.path("models", f"{kind}.json"), m,
                   {"normalizer": norm.to_dict(), "horizon": cfg.horizon})
        print(f"{kind}: fitted in {m.fit_seconds:.3f}s")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    """Score saved models on the test rows; writes ``evaluation.csv`` in the run."""
    cfg = _config(args)
    run_dir = _existing_run(cfg)
    frame, sp = load_preprocessed(run_dir)
    rows = []
    for kind in cfg.kinds:
        path = run_dir / "models" / f"{kind}.json"
        if not path.exists():
            raise StageError("evaluate", FileNotFoundError(path))
        model, raw = load_model(path)
        X = Normalizer.from_dict(raw["normalizer"]).apply(frame.X[sp.test])
        pred, model = model.timed_predict(X)
        y = frame.y[sp.test]
        rows.append(EvalRow(kind, model.fit_seconds, model.predict_seconds, model.param_count,
                            math.nan, r2(y, pred), rmse(y, pred)))
    report = EvalReport(rows, 0, frame.names)
    text = report.to_csv(run_dir / "evaluation.csv")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    """Full comparison (validation folds, test and n-step-ahead) on a preprocessed run."""
    cfg = _config(args)
    run_dir = _existing_run(cfg)
    run = _reopen(cfg, run_dir)
    frame, sp = load_preprocessed(run_dir)
    report = run_models(frame, sp, cfg, run)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    run, report = run_pipeline(cfg)
    sys.stdout.write(report.to_csv())
    print(f"run {run.id} written to {run.dir}", file=sys.stderr)
    return EXIT_OK


def _features_from_csv(path, names):
    """``(X, source_index, reason)`` from either a features CSV or raw telemetry."""
    head = pd.read_csv(path, nrows=0).columns
    if "source_index" in head:
        frame = read_frame(path)
        absent = [n for n in names if n not in frame.names]
        if absent:
            raise SchemaMismatch(f"features CSV lacks {[LABELS.get(n, n) for n in absent]}")
        X = frame.select(names).X
        reason = np.where(np.isfinite(X).all(axis=1), OK, "missing_feature").astype(object)
        return X, frame.source_index, reason
    try:
        d = load_csv(path)
    except MissingColumn as e:
        raise SchemaMismatch(str(e)) from None
    X, _, reason, _ = engineer_rows(d)
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown:
        raise SchemaMismatch(f"model expects unknown features {unknown}")
    X = X[:, [FEATURE_NAMES.index(n) for n in names]]
    return X, d.index, reason


def cmd_predict(args) -> int:
    model, raw = load_model(args.model)
    names = tuple(model.feature_names or FEATURE_NAMES[: model.n_features])
    if raw.get("schema_fingerprint") and raw["schema_fingerprint"] != artifacts.fingerprint(names):
        raise SchemaMismatch("model artifact fingerprint does not match its feature names")
    out = Path(args.output) if args.output else None
    cols = ["source_index", "prediction", "reason"]
    src = Path(args.input)
    if not src.exists():
        raise FileNotFoundError(src)
    try:
        empty = src.stat().st_size == 0 or pd.read_csv(src, nrows=1).empty
    except pd.errors.EmptyDataError:
        empty = True
    if empty:
        text = ",".join(cols) + "\n"
    else:
        try:
            X, index, reason = _features_from_csv(src, names)
        except EmptyFile:
            X, index, reason = np.zeros((0, len(names))), np.zeros(0, np.int64), np.zeros(0, object)
        pred = np.full(len(index), np.nan)
        good = reason == OK
        if good.any():
            Xg = X[good]
            if raw.get("normalizer") is not None:
                Xg = Normalizer.from_dict(raw["normalizer"]).apply(Xg)
            pred[good] = model.predict(Xg)
        df = pd.DataFrame({"source_index": index, "prediction": pred, "reason": reason})
        text = df.to_csv(index=False, float_format="%.17g", na_rep="", lineterminator="\n")
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ferryfuel", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, run=True):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--input", help="telemetry CSV")
        sp.add_argument("--seed", type=int)
        if run:
            sp.add_argument("--runs-dir", dest="runs_dir")
            sp.add_argument("--run-id", dest="run_id")
            sp.add_argument("--kinds", help=f"comma list from {','.join(KINDS)}")
            sp.add_argument("--horizon", type=int)
            sp.add_argument("--jobs", type=int)
            sp.add_argument("--features", help="'all', 'select' or a comma list")
            sp.add_argument("--split-by-trip", dest="split_by_trip", action="store_true")
        return sp

    g = common(sub.add_parser("generate", help="simulate a telemetry CSV"), run=False)
    g.add_argument("--output", "-o")
    g.add_argument("--rows", type=int, help="exact row count")
    g.add_argument("--manifest", help="regenerate from a manifest written by an earlier run")
    g.set_defaults(fn=cmd_generate)

    i = common(sub.add_parser("inspect", help="column statistics and validation summary"), run=False)
    i.add_argument("--target", default="ENGINE_1_SFC")
    i.add_argument("--output", "-o")
    i.set_defaults(fn=cmd_inspect)

    common(sub.add_parser("preprocess", help="load through split into a run directory")
           ).set_defaults(fn=cmd_preprocess)
    common(sub.add_parser("train", help="fit models on a preprocessed run")).set_defaults(fn=cmd_train)
    common(sub.add_parser("evaluate", help="score saved models on the test rows")
           ).set_defaults(fn=cmd_evaluate)
    common(sub.add_parser("compare", help="full model comparison on a preprocessed run")
           ).set_defaults(fn=cmd_compare)
    common(sub.add_parser("pipeline", help="every stage from CSV to report")
           ).set_defaults(fn=cmd_pipeline)

    pr = sub.add_parser("predict", help="predict fuel efficiency with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True, help="features CSV or telemetry CSV")
    pr.add_argument("--output", "-o")
    pr.set_defaults(fn=cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaMismatch, MissingColumn) as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except StageError as e:
        print(str(e), file=sys.stderr)
        return e.code
    except (FerryFuelError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
