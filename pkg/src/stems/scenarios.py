"""Synthetic exogenous-series generation and CSV ingestion.

Residential loads carry morning/evening dual peaks, commercial loads a
business-hour plateau, mixed buildings a blend. Solar is a clipped daylight
sinusoid, price a two-tier time-of-use schedule, carbon intensity a diurnal
curve. Everything is a pure function of (spec, seed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpec, LengthMismatch, ParseError, SchemaError
from .simulation import BUILDING_TYPES, ExogenousSeries

HEAT_WAVE_T_OUT_BAND = (35.0, 40.0)
HEAT_WAVE_DEMAND_FACTOR = 2.5
HEAT_WAVE_SOLAR_FACTOR = 1.2
COLD_WAVE_T_OUT_BAND = (-10.0, -4.0)
COLD_WAVE_DEMAND_FACTOR = 2.8
COLD_WAVE_CAPACITY_DERATING = 0.85


@dataclass(frozen=True)
class ScenarioSpec:
    """Shape parameters for one synthetic scenario."""

    building_types: tuple[str, ...]
    horizon: int
    dt: float = 1.0
    residential_base: float = 0.8    # kW
    morning_peak: float = 2.2        # kW above base, centred ~7:30
    evening_peak: float = 3.4        # kW above base, centred ~20:00
    commercial_base: float = 0.6
    commercial_peak: float = 4.0
    solar_peak: float = 4.5          # kW at solar noon
    price_offpeak: float = 0.15
    price_peak: float = 0.30
    peak_hours: tuple[int, int] = (17, 21)   # half-open [start, end)
    t_out_mean: float = 27.0
    t_out_amp: float = 8.0
    carbon_base: float = 0.35        # kgCO2/kWh
    carbon_amp: float = 0.10
    load_noise: float = 0.08         # relative, multiplicative
    solar_noise: float = 0.10

    def __post_init__(self):
        if self.horizon <= 0:
            raise InvalidSpec(f"horizon must be > 0, got {self.horizon}")
        if self.dt <= 0:
            raise InvalidSpec(f"dt must be > 0, got {self.dt}")
        if not self.building_types:
            raise InvalidSpec("at least one building type is required")
        for t in self.building_types:
            if t not in BUILDING_TYPES:
                raise InvalidSpec(f"unknown building type {t!r}")
        object.__setattr__(self, "building_types", tuple(self.building_types))


def _bump(hours: np.ndarray, centre: float, width: float) -> np.ndarray:
    # Periodic Gaussian bump so profiles wrap cleanly across midnight.
    delta = np.minimum(np.abs(hours - centre), 24.0 - np.abs(hours - centre))
    return np.exp(-0.5 * (delta / width) ** 2)


def _residential_profile(hours: np.ndarray, spec: ScenarioSpec) -> np.ndarray:
    return (spec.residential_base
            + spec.morning_peak * _bump(hours, 7.5, 1.4)
            + spec.evening_peak * _bump(hours, 20.0, 1.8))


def _commercial_profile(hours: np.ndarray, spec: ScenarioSpec) -> np.ndarray:
    open_ = 1.0 / (1.0 + np.exp(-(hours - 8.5) * 2.5))
    close = 1.0 / (1.0 + np.exp(-(17.5 - hours) * 2.5))
    midday = 1.0 + 0.25 * _bump(hours, 12.5, 1.5)
    return spec.commercial_base + spec.commercial_peak * open_ * close * midday


def _load_profile(kind: str, hours: np.ndarray, spec: ScenarioSpec) -> np.ndarray:
    if kind == "residential":
        return _residential_profile(hours, spec)
    if kind == "commercial":
        return _commercial_profile(hours, spec)
    return 0.5 * (_residential_profile(hours, spec) + _commercial_profile(hours, spec))


def generate_scenario(spec: ScenarioSpec, seed: int) -> ExogenousSeries:
    """Deterministically synthesise an exogenous series for the spec."""
    rng = np.random.default_rng(seed)
    n = len(spec.building_types)
    hours = (np.arange(spec.horizon) * spec.dt) % 24.0

    t_out = spec.t_out_mean - spec.t_out_amp * np.cos(2.0 * np.pi * (hours - 15.0) / 24.0)
    t_out = t_out + rng.normal(0.0, 0.4, size=spec.horizon)

    price = np.where((hours >= spec.peak_hours[0]) & (hours < spec.peak_hours[1]),
                     spec.price_peak, spec.price_offpeak)

    carbon = spec.carbon_base * (1.0 + 0.3 * np.cos(2.0 * np.pi * (hours - 19.0) / 24.0))
    carbon = np.maximum(carbon, 0.01)

    daylight = np.clip(np.sin(np.pi * (hours - 6.0) / 12.0), 0.0, None)
    loads = np.empty((spec.horizon, n))
    solar = np.empty((spec.horizon, n))
    for i, kind in enumerate(spec.building_types):
        scale = rng.uniform(0.9, 1.1)
        base = _load_profile(kind, hours, spec) * scale
        noise = 1.0 + spec.load_noise * rng.standard_normal(spec.horizon)
        loads[:, i] = np.maximum(base * noise, 0.0)
        solar_scale = spec.solar_peak * rng.uniform(0.85, 1.15)
        sol_noise = 1.0 + spec.solar_noise * rng.standard_normal(spec.horizon)
        solar[:, i] = np.maximum(solar_scale * daylight * sol_noise, 0.0)

    return ExogenousSeries(
        dt=spec.dt,
        non_shiftable_load=loads,
        solar_gen=solar,
        t_out=t_out,
        price=price.astype(float),
        carbon_intensity=carbon,
        building_ids=tuple(range(n)),
    )


def _map_into_band(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    mn, mx = float(np.min(values)), float(np.max(values))
    if mx - mn < 1e-12:
        return np.full_like(values, 0.5 * (lo + hi))
    return lo + (hi - lo) * (values - mn) / (mx - mn)


def apply_extreme_weather(series: ExogenousSeries, kind: str) -> ExogenousSeries:
    """Perturb a series into a heat-wave or cold-wave stress scenario.

    Heat wave: outdoor temperature mapped into the 35-40 degC band, demand
    scaled x2.5, solar scaled x1.2. Cold wave: outdoor temperature below
    -3 degC, demand scaled x2.8, battery capacity derated to 0.85 of
    configured (attached as a factor, applied by the environment).
    """
    if kind == "heat_wave":
        return ExogenousSeries(
            dt=series.dt,
            non_shiftable_load=series.non_shiftable_load * HEAT_WAVE_DEMAND_FACTOR,
            solar_gen=series.solar_gen * HEAT_WAVE_SOLAR_FACTOR,
            t_out=_map_into_band(series.t_out, *HEAT_WAVE_T_OUT_BAND),
            price=series.price.copy(),
            carbon_intensity=series.carbon_intensity.copy(),
            building_ids=series.building_ids,
            capacity_derating=series.capacity_derating,
        )
    if kind == "cold_wave":
        return ExogenousSeries(
            dt=series.dt,
            non_shiftable_load=series.non_shiftable_load * COLD_WAVE_DEMAND_FACTOR,
            solar_gen=series.solar_gen.copy(),
            t_out=_map_into_band(series.t_out, *COLD_WAVE_T_OUT_BAND),
            price=series.price.copy(),
            carbon_intensity=series.carbon_intensity.copy(),
            building_ids=series.building_ids,
            capacity_derating=COLD_WAVE_CAPACITY_DERATING,
        )
    raise ValueError(f"unknown extreme-weather kind {kind!r}")


# --- CSV schema: one row per step, columns -----------------------------------
#   time, t_out, price, carbon, then b_<id>, p_<id> per building
# ------------------------------------------------------------------------------

_REQUIRED_COLUMNS = ("time", "t_out", "price", "carbon")


def write_timeseries_csv(series: ExogenousSeries, path: str | Path) -> None:
    header = list(_REQUIRED_COLUMNS)
    for bid in series.building_ids:
        header += [f"b_{bid}", f"p_{bid}"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(series.horizon):
            row = [t, repr(float(series.t_out[t])), repr(float(series.price[t])),
                   repr(float(series.carbon_intensity[t]))]
            for i in range(series.n_buildings):
                row.append(repr(float(series.non_shiftable_load[t, i])))
                row.append(repr(float(series.solar_gen[t, i])))
            writer.writerow(row)


def _parse_cell(raw: str, row: int, column: str, nonnegative: bool = False) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"cannot parse {raw!r} as a number", row=row, column=column) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite value {raw!r}", row=row, column=column)
    if nonnegative and value < 0:
        raise ParseError(f"negative value {value}", row=row, column=column)
    return value


def load_timeseries_csv(path: str | Path, dt: float = 1.0) -> ExogenousSeries:
    """Parse and validate a time-series CSV written in the schema above."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(list(_REQUIRED_COLUMNS)) from None
        header = [h.strip() for h in header]
        missing = [c for c in _REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(missing)
        b_ids = sorted(int(h[2:]) for h in header if h.startswith("b_"))
        p_ids = sorted(int(h[2:]) for h in header if h.startswith("p_"))
        if b_ids != p_ids:
            raise LengthMismatch(
                f"load columns for buildings {b_ids} but solar columns for {p_ids}")
        if not b_ids:
            raise SchemaError(["b_<id>", "p_<id>"])
        col = {name: header.index(name) for name in header}
        rows = list(reader)

    if not rows:
        raise LengthMismatch("no data rows")
    n = len(b_ids)
    horizon = len(rows)
    t_out = np.empty(horizon)
    price = np.empty(horizon)
    carbon = np.empty(horizon)
    loads = np.empty((horizon, n))
    solar = np.empty((horizon, n))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", row=r)
        t_out[r] = _parse_cell(row[col["t_out"]], r, "t_out")
        price[r] = _parse_cell(row[col["price"]], r, "price", nonnegative=True)
        carbon[r] = _parse_cell(row[col["carbon"]], r, "carbon")
        for i, bid in enumerate(b_ids):
            loads[r, i] = _parse_cell(row[col[f"b_{bid}"]], r, f"b_{bid}", nonnegative=True)
            solar[r, i] = _parse_cell(row[col[f"p_{bid}"]], r, f"p_{bid}", nonnegative=True)

    return ExogenousSeries(
        dt=dt,
        non_shiftable_load=loads,
        solar_gen=solar,
        t_out=t_out,
        price=price,
        carbon_intensity=carbon,
        building_ids=tuple(b_ids),
    )
