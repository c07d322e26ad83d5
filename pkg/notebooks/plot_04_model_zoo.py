"""
Comparing the regression zoo
============================

Run the whole pipeline on a small synthetic dataset and read the report.
A smaller forest and fewer boosting rounds keep this quick; the defaults
reproduce the full-size setup.
"""

import tempfile
from pathlib import Path

from ferryfuel.evaluate import importance_table
from ferryfuel.pipeline import load_config, run_pipeline
from ferryfuel.synthgen import ScenarioSeed, inject_missing, simulate_voyages
from ferryfuel.telemetry import write_csv

workdir = Path(tempfile.mkdtemp())
data = inject_missing(simulate_voyages(s=ScenarioSeed(rng_seed=2019, n_rows=10000)), 0.001, seed=1)
write_csv(data, workdir / "telemetry.csv")

###########################################################################
# Flags and config entries share one structure, so the same overrides
# could come from an INI file.

quick = {k: {"n_estimators": 40} for k in ("random_forest", "adaboost", "gradient_boosting", "xgb")}
cfg = load_config(None, {"input": str(workdir / "telemetry.csv"), "runs_dir": str(workdir),
                         "run_id": "demo", "hyperparams": quick, "folds": 5})
run, report = run_pipeline(cfg)
print(report.to_csv())

###########################################################################
# Every stage left an artifact behind.

for path in sorted(run.dir.rglob("*")):
    if path.is_file():
        print(path.relative_to(run.dir))

###########################################################################
# Which inputs each model leaned on.

print(importance_table(list(report.models.values())).round(3))
