"""Episode-level evaluation metrics and baseline normalization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLogs

COMFORT_BAND = (20.0, 26.0)
DEFAULT_FAMILIES = ("battery", "power", "grid", "comfort")
VIOLATION_TOL = 1e-9

RATIO_FIELDS = ("cost", "emission", "avg_daily_peak", "consumption", "ramping")


@dataclass
class EpisodeRecord:
    """Per-step observations of one evaluated episode, all buildings."""

    dt: float
    nets: np.ndarray                 # (H, N) kW
    t_in: np.ndarray                 # (H, N) degC
    price: np.ndarray                # (H,)
    carbon: np.ndarray               # (H,)
    battery_violation: np.ndarray    # (H, N) bool
    power_violation: np.ndarray      # (H, N) bool
    grid_violation: np.ndarray       # (H,) bool

    @property
    def horizon(self) -> int:
        return self.nets.shape[0]

    @property
    def n_buildings(self) -> int:
        return self.nets.shape[1]


@dataclass(frozen=True)
class EpisodeMetrics:
    cost: float                    # currency, grid imports only
    emission: float                # kgCO2, grid imports only
    avg_daily_peak: float          # kW
    consumption: float             # kWh imported
    ramping: float                 # kW per step
    discomfort_proportion: float
    safety_violation_rate: float


@dataclass(frozen=True)
class NormalizedMetrics:
    """Ratio-to-baseline metrics; proportions pass through unnormalized.

    Fields whose baseline was zero are reported as absolute values and listed
    in absolute_flags.
    """

    cost: float
    emission: float
    avg_daily_peak: float
    consumption: float
    ramping: float
    discomfort_proportion: float
    safety_violation_rate: float
    absolute_flags: tuple[str, ...] = field(default=())


def episode_metrics(record: EpisodeRecord, comfort_band=COMFORT_BAND,
                    families=DEFAULT_FAMILIES) -> EpisodeMetrics:
    """Compute the metric suite from one episode record.

    The daily-peak metric uses whole days only; a partial trailing day is
    dropped with a warning. The safety-violation rate counts building-steps
    where any selected constraint family is breached; a grid breach at step t
    marks every building at t.
    """
    h, n = record.nets.shape
    if h == 0 or n == 0:
        raise EmptyLogs("episode record holds no steps")
    dt = record.dt
    totals = record.nets.sum(axis=1)
    imports = np.maximum(totals, 0.0)

    cost = float(np.sum(record.price * imports) * dt)
    emission = float(np.sum(record.carbon * imports) * dt)
    consumption = float(np.sum(imports) * dt)

    steps_per_day = max(int(round(24.0 / dt)), 1)
    n_days = h // steps_per_day
    if n_days == 0:
        warnings.warn("episode shorter than one day; daily peak uses the partial day")
        avg_daily_peak = float(totals.max())
    else:
        if h % steps_per_day:
            warnings.warn(f"dropping {h % steps_per_day} trailing steps of a partial day")
        trimmed = totals[:n_days * steps_per_day].reshape(n_days, steps_per_day)
        avg_daily_peak = float(trimmed.max(axis=1).mean())

    ramping = float(np.abs(np.diff(totals)).mean()) if h > 1 else 0.0

    lo, hi = comfort_band
    discomfort = (record.t_in < lo) | (record.t_in > hi)
    discomfort_proportion = float(discomfort.mean())

    violated = np.zeros((h, n), dtype=bool)
    if "battery" in families:
        violated |= record.battery_violation
    if "power" in families:
        violated |= record.power_violation
    if "grid" in families:
        violated |= record.grid_violation[:, None]
    if "comfort" in families:
        violated |= discomfort
    return EpisodeMetrics(
        cost=cost, emission=emission, avg_daily_peak=avg_daily_peak,
        consumption=consumption, ramping=ramping,
        discomfort_proportion=discomfort_proportion,
        safety_violation_rate=float(violated.mean()),
    )


def normalize(metrics: EpisodeMetrics, baseline: EpisodeMetrics) -> NormalizedMetrics:
    """Ratio to the baseline for scale metrics; proportions stay raw."""
    values = {}
    flags = []
    for name in RATIO_FIELDS:
        base = getattr(baseline, name)
        mine = getattr(metrics, name)
        if base > 0:
            values[name] = mine / base
        else:
            values[name] = mine
            flags.append(name)
    return NormalizedMetrics(
        discomfort_proportion=metrics.discomfort_proportion,
        safety_violation_rate=metrics.safety_violation_rate,
        absolute_flags=tuple(flags),
        **values,
    )
