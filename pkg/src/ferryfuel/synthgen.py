"""Seeded synthetic voyage telemetry for a double-ended ferry.

The proprietary logs are replaced by a small kinematic and fuel model:

* trips alternate between two docks along a gently curved track, with a
  speed profile that ramps up leaving a dock and down approaching the next,
  followed by a short dwell;
* propulsion demand follows the cubic speed law ``base_idle + D^(2/3) v^3 / ZP_c``
  (displacement ``D``, speed through water ``v``, fuel coefficient ``ZP_c``),
  capped at the rate the installed engines can burn, plus a headwind term;
  it sets shaft power, and the metered fuel is power times a load-dependent
  bsfc that steps down when the second turbocharger engages;
* engine speed droops and propeller pitch rises with load, and position
  fixes are taken a few seconds either side of the minute mark;
* wind is an AR(1) process around a westerly mean, the water current is a
  per-trip offset between speed over ground and through water, and each of
  the captains carries a small multiplicative speed bias.

Every trip draws from its own RNG stream spawned from the master seed, so the
output is identical however trips are scheduled.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .telemetry import CANONICAL_SCHEMA, TIMESTAMP, Dataset, make_column

KW_PER_HP = 0.745699872


@dataclass(frozen=True)
class VesselPhysics:
    k_fuel: float = 0.16             # kg fuel per brake-hp-hour
    ghp: float = 8850.0 / KW_PER_HP  # gross hp per engine at governed rpm
    load_factor: float = 0.6
    fuel_density: float = 0.85       # kg/L
    displacement: float = 9000.0     # tonnes
    fuel_coefficient: float = 3800.0
    max_engine_power: float = 8850.0  # kW per engine
    n_engines: int = 2
    base_idle: float = 100.0         # kg/h at zero speed
    wind_fuel_coeff: float = 12.0    # kg/h per knot of headwind

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"VesselPhysics.{f.name} must be positive")
        if self.load_factor > 1:
            raise ValueError("load_factor must be <= 1")


@dataclass(frozen=True)
class RouteSpec:
    dock_a: tuple = (49.3747, -123.2724)   # Horseshoe Bay
    dock_b: tuple = (49.1933, -123.9546)   # Nanaimo (Departure Bay)
    nominal_speed: float = 20.5            # knots, cruise speed through water
    mode2_radius: float = 0.05             # deg, docking zone around each dock
    trip_minutes: float = 90.0
    dwell_minutes: int = 4

    def __post_init__(self):
        if tuple(self.dock_a) == tuple(self.dock_b):
            raise ValueError("docks must be distinct")
        if not self.nominal_speed > 0:
            raise ValueError("nominal_speed must be positive")
        if not self.trip_minutes > 0 or self.dwell_minutes < 0:
            raise ValueError("trip_minutes must be positive and dwell_minutes non-negative")


@dataclass(frozen=True)
class ScenarioSeed:
    rng_seed: int = 2019
    n_trips: int = 60
    n_rows: int = 0          # if > 0, simulate until this many rows and truncate
    captain_count: int = 5
    wind_mean: float = 10.0
    wind_std: float = 5.0
    current_std: float = 0.4
    start_minute: int = 26_145_360  # 2019-09-17T00:00Z

    def __post_init__(self):
        if self.n_trips < 1 or self.captain_count < 1:
            raise ValueError("n_trips and captain_count must be >= 1")
        if self.n_rows < 0:
            raise ValueError("n_rows must be >= 0")


WIND_AR = 0.95
WIND_FROM = 270.0           # prevailing westerly, direction the wind blows from
CAPTAIN_BIAS = 0.03
RAMP_FLOOR = 0.15           # fraction of cruise speed at the docks
GPS_NOISE_DEG = 2e-5
GPS_JITTER_S = 3.0
RPM_NOISE = 1.0
LOAD_NOISE = 0.02           # sea-state variation in propulsion demand
METER_NOISE = 0.005         # fuel flow meter
TURBO_CUT_IN = 0.3          # engine load where the second turbocharger engages
TURBO_STEP = 0.15           # bsfc penalty below cut-in
DROOP_RPM = 40.0            # governor droop at full load
PITCH_PER_LOAD = 20.0       # % pitch added per unit engine load
SFC_PER_KW = 0.21           # kg/kWh brake specific consumption for power readout
SCHEDULE_SPREAD = 0.15      # +- fraction of trip time set by schedule pressure
RAMP_RANGE = (0.1, 0.25)    # fraction of the crossing spent accelerating, and decelerating
SLOW_ZONE_PROB = 0.5        # chance of a reduced-speed stretch mid-crossing


def lmph(p: VesselPhysics) -> float:
    """Litres of fuel per machine hour, ``K * GHP * LF / KPL``."""
    return p.k_fuel * p.ghp * p.load_factor / p.fuel_density


def bsfc(load):
    """Brake specific fuel consumption (kg/kWh) at fractional engine load.

    Sequential turbocharging: below ``TURBO_CUT_IN`` only one turbocharger
    runs and the engine burns ``TURBO_STEP`` more fuel per kWh.
    """
    load = np.asarray(load, dtype=np.float64)
    return SFC_PER_KW * (1.0 + TURBO_STEP * (load < TURBO_CUT_IN))


def max_fuel_rate(p: VesselPhysics) -> float:
    """Total kg/h with every engine at full load."""
    full = VesselPhysics(**{**asdict(p), "load_factor": 1.0})
    return p.n_engines * lmph(full) * p.fuel_density * (p.max_engine_power / KW_PER_HP) / p.ghp


def cruise_fuel_rate(p: VesselPhysics, v, displacement=None):
    """Total fuel rate in kg/h at speed through water ``v`` knots."""
    v = np.maximum(np.asarray(v, dtype=np.float64), 0.0)
    disp = p.displacement if displacement is None else displacement
    rate = p.base_idle + np.power(disp, 2.0 / 3.0) * v**3 / p.fuel_coefficient
    out = np.minimum(rate, max_fuel_rate(p))
    return float(out) if out.ndim == 0 else out


def bearing_deg(frm, to) -> float:
    """Initial bearing from ``frm`` to ``to`` on a locally flat earth."""
    lat0 = np.radians(0.5 * (frm[0] + to[0]))
    dn = to[0] - frm[0]
    de = (to[1] - frm[1]) * np.cos(lat0)
    return float(np.degrees(np.arctan2(de, dn)) % 360.0)


def route_length_nm(r: RouteSpec) -> float:
    lat0 = np.radians(0.5 * (r.dock_a[0] + r.dock_b[0]))
    dn = (r.dock_b[0] - r.dock_a[0]) * 60.0
    de = (r.dock_b[1] - r.dock_a[1]) * 60.0 * np.cos(lat0)
    return float(np.hypot(dn, de))


def _speed_shape(tau, ramp):
    """Piecewise-linear fraction of cruise speed over normalised trip time."""
    up = np.clip(tau / ramp, 0.0, 1.0)
    down = np.clip((1.0 - tau) / ramp, 0.0, 1.0)
    return RAMP_FLOOR + (1.0 - RAMP_FLOOR) * np.minimum(up, down)


def _bump(tau, mid, half_width=0.06, edge=0.03):
    """Trapezoid equal to 1 on ``|tau - mid| <= half_width`` falling to 0 over ``edge``."""
    return np.clip((half_width + edge - np.abs(tau - mid)) / edge, 0.0, 1.0)


def _wind(rng, n, s: ScenarioSeed):
    mean_to = np.radians((WIND_FROM + 180.0) % 360.0)
    mu = s.wind_mean * np.array([np.sin(mean_to), np.cos(mean_to)])
    innov = s.wind_std * np.sqrt(1.0 - WIND_AR**2)
    uv = np.empty((n, 2))
    uv[0] = mu + s.wind_std * rng.standard_normal(2)
    eps = rng.standard_normal((n, 2))
    for t in range(1, n):
        uv[t] = mu + WIND_AR * (uv[t - 1] - mu) + innov * eps[t]
    speed = np.hypot(uv[:, 0], uv[:, 1])
    # direction the wind comes from, degrees clockwise from north
    angle = (np.degrees(np.arctan2(uv[:, 0], uv[:, 1])) + 180.0) % 360.0
    return angle, speed


def _simulate_trip(trip: int, rng, p: VesselPhysics, r: RouteSpec, s: ScenarioSeed,
                   captain_bias: np.ndarray):
    forward = trip % 2 == 0
    start, end = (r.dock_a, r.dock_b) if forward else (r.dock_b, r.dock_a)
    bias = 1.0 + captain_bias[trip % s.captain_count]
    # schedule pressure: late departures are made up with a faster crossing
    pressure = rng.uniform(1.0 - SCHEDULE_SPREAD, 1.0 + SCHEDULE_SPREAD)
    T = max(10, int(round(r.trip_minutes * pressure / bias + rng.normal(0.0, 1.5))))
    n_move = T
    n = n_move + r.dwell_minutes

    L_nm = route_length_nm(r)
    ramp = rng.uniform(*RAMP_RANGE)
    slow = rng.random() < SLOW_ZONE_PROB
    slow_depth = rng.uniform(0.25, 0.5) if slow else 0.0
    slow_mid = rng.uniform(0.4, 0.6)

    def shape_of(tau):
        return _speed_shape(tau, ramp) * (1.0 - slow_depth * _bump(tau, slow_mid))

    tau_fine = np.linspace(0.0, 1.0, 20 * T + 1)
    shape = shape_of(tau_fine)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (shape[1:] + shape[:-1]))])
    cum /= cum[-1]
    v_cruise = L_nm / (T / 60.0 * shape.mean())  # cover the route in T minutes

    minute = np.arange(n)
    tau = np.minimum(minute / T, 1.0)
    frac = np.interp(tau, tau_fine, cum)
    moving = minute < n_move

    # lateral offset gives a slightly curved track
    sway = rng.normal(0.0, 0.006)
    perp = np.array([-(end[1] - start[1]), end[0] - start[0]])
    perp /= np.hypot(*perp)
    # the position fix is taken up to GPS_JITTER_S seconds off the minute mark
    jitter = rng.uniform(-GPS_JITTER_S, GPS_JITTER_S, n) / 60.0
    fix = np.interp(np.clip((minute + jitter) / T, 0.0, 1.0), tau_fine, cum)
    lat = start[0] + fix * (end[0] - start[0]) + sway * np.sin(np.pi * fix) * perp[0]
    lon = start[1] + fix * (end[1] - start[1]) + sway * np.sin(np.pi * fix) * perp[1]

    sog = np.where(moving, v_cruise * shape_of(tau), 0.0)
    sog = np.maximum(sog * (1.0 + 0.01 * rng.standard_normal(n)), 0.0)
    current = rng.normal(0.0, s.current_std) + 0.1 * s.current_std * np.cumsum(
        rng.standard_normal(n)) / np.sqrt(n)
    stw = np.maximum(sog - np.where(moving, current, 0.0), 0.0)

    base_heading = bearing_deg(start, end)
    dfrac = np.gradient(frac)
    track_dev = np.degrees(np.arctan2(sway * np.pi * np.cos(np.pi * frac) * dfrac,
                                      np.maximum(dfrac, 1e-9) * np.hypot(end[0] - start[0],
                                                                         end[1] - start[1])))
    heading = (base_heading + np.where(moving, track_dev, 0.0)
               + rng.normal(0.0, 0.8, n)) % 360.0
    track = (heading + rng.normal(0.0, 0.5, n)) % 360.0
    rate_of_turn = np.concatenate([[0.0], np.diff(np.unwrap(np.radians(heading)))]) * 180 / np.pi / 60

    wind_angle_true, wind_speed_true = _wind(rng, n, s)
    wind_angle = (wind_angle_true + rng.normal(0.0, 3.0, n)) % 360.0
    wind_speed = np.maximum(wind_speed_true + rng.normal(0.0, 0.3, n), 0.0)
    headwind = np.cos(np.radians(wind_angle - heading)) * wind_speed

    cargo = float(np.clip(rng.normal(600_000.0, 150_000.0), 100_000.0, 1_200_000.0))
    disp = p.displacement + cargo / 1000.0
    # hull and wind demand, expressed as fuel at the reference bsfc, sets shaft power
    demand = cruise_fuel_rate(p, stw, disp) + np.where(moving, p.wind_fuel_coeff * headwind, 0.0)
    demand = np.maximum(demand * (1.0 + LOAD_NOISE * rng.standard_normal(n)), 0.5 * p.base_idle)
    split = 0.5 + 0.01 * rng.standard_normal(n)
    power1 = np.minimum(demand * split / SFC_PER_KW, p.max_engine_power)
    power2 = np.minimum(demand * (1.0 - split) / SFC_PER_KW, p.max_engine_power)
    load1 = power1 / p.max_engine_power
    load2 = power2 / p.max_engine_power
    sfc1 = power1 * bsfc(load1) * (1.0 + METER_NOISE * rng.standard_normal(n))
    sfc2 = power2 * bsfc(load2) * (1.0 + METER_NOISE * rng.standard_normal(n))

    dist_a = np.hypot(lat - r.dock_a[0], lon - r.dock_a[1])
    dist_b = np.hypot(lat - r.dock_b[0], lon - r.dock_b[1])
    mode = ((np.minimum(dist_a, dist_b) > r.mode2_radius)).astype(float)

    def pitch_of(v):
        low = 30.0 * v / 9.0
        high = 30.0 + 70.0 * (v - 9.0) / (21.5 - 9.0)
        return np.clip(np.where(v < 9.0, low, high), 0.0, 100.0)

    # the combinator adds pitch for thrust and the governor lets rpm droop under load
    pitch1 = pitch_of(stw) + PITCH_PER_LOAD * load1 + rng.normal(0.0, 1.0, n)
    pitch2 = pitch_of(stw) + PITCH_PER_LOAD * load2 + rng.normal(0.0, 1.0, n)
    rpm1 = 300.0 + 12.0 * stw - DROOP_RPM * load1 + rng.normal(0.0, RPM_NOISE, n)
    rpm2 = 300.0 + 12.0 * stw - DROOP_RPM * load2 + rng.normal(0.0, RPM_NOISE, n)
    torque1 = power1 / (rpm1 * 2.0 * np.pi / 60.0)
    torque2 = power2 / (rpm2 * 2.0 * np.pi / 60.0)
    v_ms = np.maximum(stw * 0.514444, 0.5)
    thrust1 = 0.6 * power1 / v_ms
    thrust2 = 0.6 * power2 / v_ms
    flow1 = sfc1 / p.fuel_density / 60.0
    flow2 = sfc2 / p.fuel_density / 60.0
    depth = 25.0 + 320.0 * np.sin(np.pi * frac) + rng.normal(0.0, 5.0, n)
    drift = np.radians(track - heading)

    return {
        "DEPTH": depth,
        "ENGINE_1_FLOWRATE": flow1,
        "ENGINE_2_FLOWRATE": flow2,
        "ENGINE_1_RATE_A": np.maximum(flow1 * 0.98 + rng.normal(0, 0.05, n), 0.0),
        "ENGINE_2_RATE_A": np.maximum(flow2 * 0.98 + rng.normal(0, 0.05, n), 0.0),
        "ENGINE_1_TEMP_A": 40.0 + rng.normal(0.0, 1.0, n),
        "ENGINE_2_TEMP_A": 40.0 + rng.normal(0.0, 1.0, n),
        "ENGINE_1_SFC": sfc1,
        "ENGINE_2_SFC": sfc2,
        "HEADING": heading,
        "LATITUDE": lat + rng.normal(0.0, GPS_NOISE_DEG, n),
        "LONGITUDE": lon + rng.normal(0.0, GPS_NOISE_DEG, n),
        "PITCH_1": np.clip(pitch1, 0.0, None),
        "PITCH_2": np.clip(pitch2, 0.0, None),
        "POWER_1": power1,
        "POWER_2": power2,
        "RATE_OF_TURN": rate_of_turn,
        "SOG": sog,
        "SOG_LONG": sog * np.cos(drift),
        "SOG_TRANS": sog * np.sin(drift),
        "SPEED_1": rpm1,
        "SPEED_2": rpm2,
        "STW": stw,
        "THRUST_1": thrust1,
        "THRUST_2": thrust2,
        "TORQUE_1": torque1,
        "TORQUE_2": torque2,
        "TRACK_MADE_GOOD": track,
        "WIND_ANGLE": wind_angle,
        "WIND_SPEED": wind_speed,
        "WIND_ANGLE_TRUE": wind_angle_true,
        "WIND_SPEED_TRUE": wind_speed_true,
        "OPERATIONAL_MODE": mode,
        "TRIP_DURATION": minute.astype(float),
        "CARGO": np.full(n, cargo),
    }


def simulate_voyages(p: VesselPhysics = VesselPhysics(), r: RouteSpec = RouteSpec(),
                     s: ScenarioSeed = ScenarioSeed()) -> Dataset:
    """Telemetry for alternating trips at a 1-minute cadence.

    Produces ``s.n_trips`` trips, or exactly ``s.n_rows`` rows when that is
    positive (the last trip is cut short).
    """
    root = np.random.SeedSequence(s.rng_seed)
    master = root.spawn(1)[0]
    captain_bias = np.random.default_rng(master).uniform(-CAPTAIN_BIAS, CAPTAIN_BIAS,
                                                         s.captain_count)
    parts, total, i = [], 0, 0
    while (total < s.n_rows) if s.n_rows > 0 else (i < s.n_trips):
        part = _simulate_trip(i, np.random.default_rng(root.spawn(1)[0]), p, r, s, captain_bias)
        parts.append(part)
        total += len(part["DEPTH"])
        i += 1
    data = {k: np.concatenate([part[k] for part in parts]) for k in parts[0]}
    if s.n_rows > 0:
        data = {k: v[: s.n_rows] for k, v in data.items()}
    n = len(data["DEPTH"])
    data = {TIMESTAMP: s.start_minute + np.arange(n, dtype=np.float64), **data}
    by_name = {c.name: c for c in CANONICAL_SCHEMA}
    return Dataset(tuple(make_column(by_name[c.name], data[c.name]) for c in CANONICAL_SCHEMA))


def inject_missing(d: Dataset, rate: float, seed: int = 0, *, protect=(TIMESTAMP,)) -> Dataset:
    """Mask every cell independently with probability ``rate``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("rate must lie in [0, 1)")
    if rate == 0.0:
        return d
    rng = np.random.default_rng(seed)
    cols = []
    for c in d.columns:
        draw = rng.random(d.n_rows)
        if c.name in protect:
            cols.append(c)
            continue
        cols.append(make_column(c.spec, c.values, c.missing | (draw < rate)))
    return Dataset(tuple(cols), d.index)


# ---------------------------------------------------------------- config

def scenario_to_dict(p: VesselPhysics, r: RouteSpec, s: ScenarioSeed) -> dict:
    return {"physics": asdict(p), "route": asdict(r), "scenario": asdict(s)}


def scenario_from_dict(d: dict):
    route = dict(d.get("route", {}))
    for k in ("dock_a", "dock_b"):
        if k in route:
            route[k] = tuple(route[k])
    return (VesselPhysics(**d.get("physics", {})), RouteSpec(**route),
            ScenarioSeed(**d.get("scenario", {})))


def write_manifest(path, p: VesselPhysics, r: RouteSpec, s: ScenarioSeed, extra=None) -> Path:
    path = Path(path)
    payload = {"generator": "ferryfuel.synthgen", **scenario_to_dict(p, r, s), **(extra or {})}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path
