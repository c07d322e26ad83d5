"""
Finding the cruise mode
=======================

The logged operational mode is not used for filtering. Instead the mode is
recovered from the telemetry with PCA followed by K-means, and the result
is checked against the log.
"""

import numpy as np

from ferryfuel.cluster import compare_partitions, elbow_k, find_modes
from ferryfuel.synthgen import ScenarioSeed, simulate_voyages
from ferryfuel.telemetry import DEFAULT_DROP, drop_columns

data = simulate_voyages(s=ScenarioSeed(rng_seed=5, n_rows=8000))
kept = drop_columns(data, DEFAULT_DROP)

###########################################################################
# Standardise, project on six principal components and cluster. The elbow
# curve is computed alongside so the choice of ``k = 2`` can be checked.

modes = find_modes(kept, n_pcs=6, k=2, seed=0, k_max=6)
share = modes.pca.explained_variance / modes.pca.explained_variance.sum()
print("variance share of the first six components:", np.round(share[:6], 3))

for k, inertia in modes.elbow:
    print(f"k={k}  inertia={inertia:12.1f}")
print("largest relative drop at k =", elbow_k(modes.elbow))

###########################################################################
# Mode 1 is the cluster where the propeller pitch is mostly high.
# Agreement with the logged mode:

logged = data.values("OPERATIONAL_MODE").astype(int)
found = modes.is_mode1.astype(int)
var_logged, mae, var_diff = compare_partitions(logged, found)
print(f"mismatch rate {mae:.3f}, variance of logged {var_logged:.3f}, of difference {var_diff:.3f}")
