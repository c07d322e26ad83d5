"""
Features, target and outliers
=============================

Ten model inputs are derived from the raw channels; the target is fuel
burnt per degree of distance travelled.
"""

import numpy as np

from ferryfuel.features import LABELS, engineer, select_features
from ferryfuel.preprocess import iqr_filter
from ferryfuel.synthgen import ScenarioSeed, simulate_voyages

data = simulate_voyages(s=ScenarioSeed(rng_seed=8, n_rows=6000))
frame = engineer(data)
print(f"{frame.n_rows} of {data.n_rows} rows have a defined target")

###########################################################################
# The first row of a trip has no predecessor and so no distance; those
# rows drop out here.

for name in frame.names:
    col = frame.column(name)
    print(f"{LABELS[name]:22s} {col.mean():12.4f} +/- {col.std():.4f}")
print(f"{'Fuel efficiency':22s} {frame.y.mean():12.1f} +/- {frame.y.std():.1f}")

###########################################################################
# The IQR rule is applied to every column at once; a row survives only if
# all its values sit inside their column's fences.

keep, masks = iqr_filter(np.column_stack([frame.X, frame.y]))
print(f"IQR keeps {keep.sum()} of {keep.size} rows")
lo, hi = masks[-1].bounds()
print(f"target fences [{lo:.0f}, {hi:.0f}]")

###########################################################################
# Correlation pruning is available but not the default: the model
# comparison uses all ten inputs.

spec = select_features(frame.take(np.flatnonzero(keep)))
print("pruned set:", [LABELS[n] for n in spec.selected])
