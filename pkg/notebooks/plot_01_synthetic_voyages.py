"""
Synthetic ferry voyages
=======================

Simulate a few days of one-minute telemetry for a two-engine ferry and
look at what the generator produces.
"""

import numpy as np

from ferryfuel.synthgen import RouteSpec, ScenarioSeed, VesselPhysics, bsfc, route_length_nm, simulate_voyages
from ferryfuel.telemetry import column_stats, validate

###########################################################################
# One scenario is three small records: the vessel, the route and the seed.
# Everything downstream is a pure function of them.

physics = VesselPhysics()
route = RouteSpec()
scenario = ScenarioSeed(rng_seed=2019, n_trips=12)
print(f"route length {route_length_nm(route):.1f} nm at {route.nominal_speed} kn")

data = simulate_voyages(physics, route, scenario)
print(data.n_rows, "rows,", data.n_columns, "columns")
print("validation problems:", len(validate(data)))

###########################################################################
# A single crossing: slow manoeuvring at each dock, cruise in between.

stw = data.values("STW")
mode = data.values("OPERATIONAL_MODE")
trip0 = slice(0, 95)
for minute in range(0, 95, 8):
    bar = "#" * int(stw[trip0][minute])
    print(f"{minute:3d} min  mode {int(mode[minute])}  {bar}")

###########################################################################
# Fuel burn follows engine load, with a specific-consumption penalty at
# light load. That step is one of the non-linearities the tree models pick up.

for load in (0.1, 0.25, 0.35, 0.6, 0.9):
    print(f"load {load:.2f}  bsfc factor {bsfc(load):.3f}")

###########################################################################
# Which channels track engine-1 fuel consumption most closely?

stats = sorted(column_stats(data, "ENGINE_1_SFC"), key=lambda s: -abs(s.target_correlation))
for s in stats[:8]:
    print(f"{s.name:18s} r={s.target_correlation:+.3f}  mean={s.mean:10.3f}")

cruise = mode == 1
print("cruise share", round(float(np.mean(cruise)), 3))
