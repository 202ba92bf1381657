"""Safety shield: barrier margins, exact closest-safe-action projection, and
the per-building verification loop.

Per action the feasible set is a box (device limits intersected with the
battery's SOC-safe power interval) cut by two parallel half-planes from the
power-cap and grid-headroom constraints, all linear after case-splitting the
absolute values. Projection onto that polytope is solved in closed form by
enumerating candidate active sets; no external solver is involved.

The grid constraint couples buildings, so the loop grants each building a
headroom computed from already-committed nets (earlier ids) plus a
zero-action baseline for the rest; this is conservative and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, Infeasible
from .simulation import Action, BuildingConfig, BuildingState, ExoSnapshot, \
    net_consumption, soc_update_unclamped

MARGIN_TOL = 1e-9  # roundoff absorbed when testing margin >= 0

PASSED = "passed"
PROJECTED = "projected"
EMERGENCY = "emergency"


@dataclass(frozen=True)
class SafetySpec:
    """System-wide safety limits.

    soc bounds and the per-building power cap default to the values in each
    BuildingConfig; setting them here overrides every building globally.
    margin tightens every constraint family by the same scalar (its own units
    per family) and is used by the optional training schedule.
    """

    p_grid_max: float
    margin: float = 0.0
    soc_min: float | None = None
    soc_max: float | None = None
    p_building_max: float | None = None

    def __post_init__(self):
        if self.p_grid_max <= 0:
            raise ConfigError("p_grid_max must be > 0")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")

    def soc_bounds(self, config: BuildingConfig) -> tuple[float, float]:
        lo = self.soc_min if self.soc_min is not None else config.soc_min
        hi = self.soc_max if self.soc_max is not None else config.soc_max
        return lo, hi

    def power_cap(self, config: BuildingConfig) -> float:
        return self.p_building_max if self.p_building_max is not None else config.p_building_max


@dataclass(frozen=True)
class ShieldContext:
    """Everything one building's check needs beyond its own state/config."""

    load: float              # kW non-shiftable at this step
    solar: float             # kW
    dt: float                # hours
    granted_headroom: float  # kW of grid import this building may use
    spec: SafetySpec


@dataclass(frozen=True)
class ConstraintEval:
    h_battery: float
    h_power: float
    h_grid: float
    satisfied: tuple[bool, bool, bool]

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied)


@dataclass(frozen=True)
class ShieldResult:
    safe_action: Action
    kind: str                       # passed | projected | emergency
    evals_before: ConstraintEval
    evals_after: ConstraintEval
    distance: float                 # kW, ||safe - raw||


def h_battery(state: BuildingState, action: Action, config: BuildingConfig,
              dt: float, spec: SafetySpec | None = None) -> float:
    """Margin to the SOC limits after applying the battery action (unclamped)."""
    lo, hi = (spec.soc_bounds(config) if spec is not None
              else (config.soc_min, config.soc_max))
    soc_next = soc_update_unclamped(state.soc, action.p_batt, dt, config)
    return min(hi - soc_next, soc_next - lo)


def h_power(net: float, config: BuildingConfig, spec: SafetySpec | None = None) -> float:
    """Margin to the building power cap; binds imports and exports alike."""
    cap = spec.power_cap(config) if spec is not None else config.p_building_max
    return cap - abs(net)


def h_grid(nets, spec: SafetySpec) -> float:
    """System margin: grid cap minus total positive net consumption."""
    nets = np.asarray(nets, dtype=float)
    return spec.p_grid_max - float(np.sum(np.maximum(nets, 0.0)))


def _grid_margin_vs_headroom(net: float, granted: float) -> float:
    return granted - max(0.0, net)


def verify(state: BuildingState, action: Action, config: BuildingConfig,
           ctx: ShieldContext) -> ConstraintEval:
    """Evaluate all three margins at the proposed action."""
    spec = ctx.spec
    net = net_consumption(ctx.load, action.p_hvac, action.p_batt, ctx.solar)
    hb = h_battery(state, action, config, ctx.dt, spec)
    hp = h_power(net, config, spec)
    hg = _grid_margin_vs_headroom(net, ctx.granted_headroom)
    need = spec.margin - MARGIN_TOL
    return ConstraintEval(h_battery=hb, h_power=hp, h_grid=hg,
                          satisfied=(hb >= need, hp >= need, hg >= need))


def _soc_inverse(soc: float, target: float, dt: float, config: BuildingConfig) -> float:
    """Battery power that lands exactly on a target SOC in one step."""
    delta = target - soc
    if delta >= 0:
        return delta * config.battery_capacity / (config.charge_eff * dt)
    return delta * config.battery_capacity * config.discharge_eff / dt


def battery_safe_interval(state: BuildingState, config: BuildingConfig, dt: float,
                          spec: SafetySpec) -> tuple[float, float]:
    """Interval of battery powers keeping next SOC inside the (tightened) bounds."""
    lo, hi = spec.soc_bounds(config)
    lo, hi = lo + spec.margin, hi - spec.margin
    return (_soc_inverse(state.soc, lo, dt, config),
            _soc_inverse(state.soc, hi, dt, config))


def _feasible_box_and_band(state: BuildingState, config: BuildingConfig,
                           ctx: ShieldContext):
    """Feasible set as (battery interval, hvac interval, net-sum band).

    The band constrains s = p_batt + p_hvac through the net balance
    net = load + s - solar, combining |net| <= cap and net <= headroom.
    """
    spec = ctx.spec
    b_lo, b_hi = battery_safe_interval(state, config, ctx.dt, spec)
    b_lo = max(b_lo, -config.battery_power_limit)
    b_hi = min(b_hi, config.battery_power_limit)
    h_lo, h_hi = 0.0, config.hvac_power_max
    cap = spec.power_cap(config) - spec.margin
    grid_cap = ctx.granted_headroom - spec.margin
    if grid_cap < -MARGIN_TOL:
        net_hi = -np.inf           # max(0, net) <= negative headroom: unsatisfiable
    else:
        net_hi = min(cap, max(grid_cap, 0.0))
    net_lo = -cap
    offset = ctx.load - ctx.solar
    return (b_lo, b_hi), (h_lo, h_hi), (net_lo - offset, net_hi - offset)


def _project_box_band(a: np.ndarray, box_b: tuple[float, float],
                      box_h: tuple[float, float],
                      band: tuple[float, float]) -> np.ndarray | None:
    """Euclidean projection onto {box} intersect {s_lo <= x + y <= s_hi}.

    Enumerates the three possible active sets (band inactive, lower face,
    upper face); each candidate is a closed-form projection, and the nearest
    feasible candidate is exact. Returns None when the polytope is empty.
    """
    (b_lo, b_hi), (h_lo, h_hi), (s_lo, s_hi) = box_b, box_h, band
    if b_lo > b_hi + MARGIN_TOL or h_lo > h_hi + MARGIN_TOL or s_lo > s_hi + MARGIN_TOL:
        return None
    b_lo, b_hi = min(b_lo, b_hi), max(b_lo, b_hi)

    candidates = []
    cb = min(max(a[0], b_lo), b_hi)
    ch = min(max(a[1], h_lo), h_hi)
    if s_lo - MARGIN_TOL <= cb + ch <= s_hi + MARGIN_TOL:
        candidates.append(np.array([cb, ch]))
    for c in (s_lo, s_hi):
        seg_lo = max(b_lo, c - h_hi)
        seg_hi = min(b_hi, c - h_lo)
        if seg_lo > seg_hi + MARGIN_TOL:
            continue
        foot = 0.5 * (a[0] - a[1] + c)
        x = min(max(foot, seg_lo), seg_hi)
        candidates.append(np.array([x, c - x]))
    if not candidates:
        return None
    dists = [float(np.sum((cand - a) ** 2)) for cand in candidates]
    return candidates[int(np.argmin(dists))]


def project(action: Action, state: BuildingState, config: BuildingConfig,
            ctx: ShieldContext) -> Action:
    """Closest safe action to the proposal, or Infeasible if none exists."""
    box_b, box_h, band = _feasible_box_and_band(state, config, ctx)
    point = _project_box_band(action.as_array(), box_b, box_h, band)
    if point is None:
        raise Infeasible("safe-action polytope is empty")
    return Action(p_batt=float(point[0]), p_hvac=float(point[1]))


def emergency_action(state: BuildingState, config: BuildingConfig,
                     ctx: ShieldContext, violation_kind: str = "") -> Action:
    """Conservative fallback: HVAC off, battery stepping toward mid-SOC.

    The battery rate is the one-step move that reaches the midpoint, clipped
    to the SOC-safe interval, the device limit, and (when possible) to powers
    keeping the building's own net within its cap and granted headroom. When
    even that interval is empty the battery idles.
    """
    spec = ctx.spec
    lo, hi = spec.soc_bounds(config)
    target = 0.5 * (lo + hi)
    p = _soc_inverse(state.soc, target, ctx.dt, config)

    b_lo, b_hi = battery_safe_interval(state, config, ctx.dt, spec)
    b_lo = max(b_lo, -config.battery_power_limit)
    b_hi = min(b_hi, config.battery_power_limit)
    if b_lo <= b_hi:
        p = min(max(p, b_lo), b_hi)
    else:
        p = 0.0

    cap = spec.power_cap(config) - spec.margin
    offset = ctx.load - ctx.solar
    grid_cap = ctx.granted_headroom - spec.margin
    n_lo = -cap - offset
    if grid_cap < -MARGIN_TOL:
        n_hi = -np.inf
    else:
        n_hi = min(cap, max(grid_cap, 0.0)) - offset
    lo_all = max(b_lo, n_lo)
    hi_all = min(b_hi, n_hi)
    if lo_all <= hi_all:
        p = min(max(p, lo_all), hi_all)
    else:
        p = 0.0
    return Action(p_batt=float(p), p_hvac=0.0)


def shield_all(states: list[BuildingState], actions: list[Action],
               configs: list[BuildingConfig], spec: SafetySpec,
               exo: ExoSnapshot, dt: float) -> list[ShieldResult]:
    """Verify/project/fallback for every building in ascending id order.

    Building i is granted the grid headroom left after the committed nets of
    already-processed buildings and the zero-action baseline of the rest.
    """
    n = len(states)
    if not (len(actions) == len(configs) == n):
        raise ConfigError("states, actions, and configs disagree on N")
    order = sorted(range(n), key=lambda i: configs[i].id)
    baseline = np.array([max(0.0, float(exo.load[i]) - float(exo.solar[i]))
                         for i in range(n)])
    committed_pos = 0.0
    remaining_baseline = float(baseline.sum())
    results: list[ShieldResult | None] = [None] * n

    for i in order:
        remaining_baseline -= baseline[i]
        granted = spec.p_grid_max - committed_pos - remaining_baseline
        ctx = ShieldContext(load=float(exo.load[i]), solar=float(exo.solar[i]),
                            dt=dt, granted_headroom=granted, spec=spec)
        raw = actions[i].clamped(configs[i])
        before = verify(states[i], raw, configs[i], ctx)
        if before.all_satisfied:
            safe, kind, distance = raw, PASSED, 0.0
        else:
            try:
                safe = project(raw, states[i], configs[i], ctx)
                kind = PROJECTED
            except Infeasible:
                worst = ("battery", "power", "grid")[int(np.argmin(
                    [before.h_battery, before.h_power, before.h_grid]))]
                safe = emergency_action(states[i], configs[i], ctx, violation_kind=worst)
                kind = EMERGENCY
            distance = float(np.linalg.norm(safe.as_array() - raw.as_array()))
        after = verify(states[i], safe, configs[i], ctx)
        net = net_consumption(ctx.load, safe.p_hvac, safe.p_batt, ctx.solar)
        committed_pos += max(0.0, net)
        results[i] = ShieldResult(safe_action=safe, kind=kind, evals_before=before,
                                  evals_after=after, distance=distance)
    return results  # type: ignore[return-value]
