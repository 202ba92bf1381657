"""Discrete-time multi-building plant model.

Batteries follow a lossy state-of-charge integrator, zones follow a
first-order lumped thermal model, and each building's net electrical
balance is load + HVAC + battery - solar (negative means export).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, HorizonExceeded

BUILDING_TYPES = ("residential", "commercial", "mixed")


@dataclass(frozen=True)
class BuildingConfig:
    """Static device and envelope parameters for one building."""

    id: int
    building_type: str
    battery_capacity: float        # kWh
    battery_power_limit: float     # kW, symmetric bound on |p_batt|
    p_building_max: float          # kW, cap on |net consumption|
    hvac_power_max: float          # kW electrical
    hvac_cop: float
    thermal_capacitance: float     # kWh/degC
    thermal_conductance: float     # kW/degC
    t_ref: float                   # degC comfort setpoint
    location: tuple[float, float] = (0.0, 0.0)   # km
    soc_min: float = 0.1
    soc_max: float = 0.9
    charge_eff: float = 1.0
    discharge_eff: float = 1.0

    def __post_init__(self):
        if self.building_type not in BUILDING_TYPES:
            raise ConfigError(f"unknown building_type {self.building_type!r}")
        positive = ("battery_capacity", "battery_power_limit", "p_building_max",
                    "hvac_power_max", "hvac_cop", "thermal_capacitance",
                    "thermal_conductance")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"building {self.id}: {name} must be > 0")
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ConfigError(f"building {self.id}: need 0 <= soc_min < soc_max <= 1")
        for name in ("charge_eff", "discharge_eff"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ConfigError(f"building {self.id}: {name} must be in (0, 1]")
        object.__setattr__(self, "location",
                           (float(self.location[0]), float(self.location[1])))

    def attributes(self) -> np.ndarray:
        """Similarity feature vector: type one-hot, capacity, efficiencies."""
        one_hot = [1.0 if self.building_type == t else 0.0 for t in BUILDING_TYPES]
        return np.asarray(one_hot + [self.battery_capacity, self.charge_eff,
                                     self.discharge_eff], dtype=float)


@dataclass(frozen=True)
class BuildingState:
    """Dynamic quantities advanced each step."""

    soc: float        # fraction of capacity
    t_in: float       # degC
    prev_net: float   # kW, net consumption of the previous step


@dataclass(frozen=True)
class Action:
    """Continuous control for one building: battery power (charge positive)
    and HVAC electrical power (nonnegative; heating/cooling direction is
    chosen by the thermostat mode, not the sign)."""

    p_batt: float
    p_hvac: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_batt, self.p_hvac], dtype=float)

    def clamped(self, config: BuildingConfig) -> "Action":
        """Clip to the device box; state-dependent limits are the shield's job."""
        lim = config.battery_power_limit
        return Action(
            p_batt=float(min(max(self.p_batt, -lim), lim)),
            p_hvac=float(min(max(self.p_hvac, 0.0), config.hvac_power_max)),
        )


@dataclass(frozen=True)
class ExoSnapshot:
    """Exogenous values at one step: scalars plus per-building load/solar."""

    t: int
    t_out: float
    price: float
    carbon: float
    load: np.ndarray    # (N,) kW
    solar: np.ndarray   # (N,) kW


@dataclass
class ExogenousSeries:
    """Aligned exogenous series for all buildings over one scenario horizon."""

    dt: float                       # hours per step
    non_shiftable_load: np.ndarray  # (horizon, N) kW
    solar_gen: np.ndarray           # (horizon, N) kW
    t_out: np.ndarray               # (horizon,) degC
    price: np.ndarray               # (horizon,) currency/kWh
    carbon_intensity: np.ndarray    # (horizon,) kgCO2/kWh
    building_ids: tuple[int, ...]
    capacity_derating: float = 1.0  # multiplies battery capacity (cold-wave derating)

    def __post_init__(self):
        self.non_shiftable_load = np.asarray(self.non_shiftable_load, dtype=float)
        self.solar_gen = np.asarray(self.solar_gen, dtype=float)
        self.t_out = np.asarray(self.t_out, dtype=float)
        self.price = np.asarray(self.price, dtype=float)
        self.carbon_intensity = np.asarray(self.carbon_intensity, dtype=float)
        h = self.horizon
        n = len(self.building_ids)
        if self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.non_shiftable_load.shape != (h, n) or self.solar_gen.shape != (h, n):
            raise ConfigError("per-building series must have shape (horizon, n_buildings)")
        for name in ("t_out", "price", "carbon_intensity"):
            if getattr(self, name).shape != (h,):
                raise ConfigError(f"{name} length must equal horizon")
        if np.any(self.non_shiftable_load < 0):
            raise ConfigError("loads must be nonnegative")
        if np.any(self.solar_gen < 0):
            raise ConfigError("solar generation must be nonnegative")
        if np.any(self.price < 0):
            raise ConfigError("prices must be nonnegative")

    @property
    def horizon(self) -> int:
        return self.t_out.shape[0]

    @property
    def n_buildings(self) -> int:
        return len(self.building_ids)

    def at(self, t: int) -> ExoSnapshot:
        if not 0 <= t < self.horizon:
            raise HorizonExceeded(f"step {t} outside horizon {self.horizon}")
        return ExoSnapshot(
            t=t,
            t_out=float(self.t_out[t]),
            price=float(self.price[t]),
            carbon=float(self.carbon_intensity[t]),
            load=self.non_shiftable_load[t],
            solar=self.solar_gen[t],
        )


@dataclass(frozen=True)
class RewardInputs:
    """Snapshot consumed by the reward function for one building and step."""

    net: float        # kW
    prev_net: float   # kW, net of the previous step
    solar: float      # kW
    t_in: float       # degC after the step
    price: float
    carbon: float


@dataclass(frozen=True)
class StepOutcome:
    next_state: BuildingState
    net: float
    reward_inputs: RewardInputs


def net_consumption(b: float, p_hvac: float, p_batt: float, p_solar: float) -> float:
    """Building electrical balance: loads plus HVAC plus battery minus solar."""
    return b + p_hvac + p_batt - p_solar


def soc_update(soc: float, p_batt: float, dt: float,
               config: BuildingConfig) -> tuple[float, bool]:
    """Advance state of charge one step.

    Charging stores charge_eff * p_batt * dt; discharging drains
    |p_batt| * dt / discharge_eff. Returns the physically clamped SOC and a
    flag that is True when clamping to [0, 1] fired (the shield is supposed
    to make that impossible).
    """
    if p_batt >= 0:
        delta = config.charge_eff * p_batt * dt / config.battery_capacity
    else:
        delta = p_batt * dt / (config.battery_capacity * config.discharge_eff)
    raw = soc + delta
    clamped = min(max(raw, 0.0), 1.0)
    return clamped, clamped != raw


def soc_update_unclamped(soc: float, p_batt: float, dt: float,
                         config: BuildingConfig) -> float:
    """SOC after one step without the physical clamp (for margin evaluation)."""
    if p_batt >= 0:
        return soc + config.charge_eff * p_batt * dt / config.battery_capacity
    return soc + p_batt * dt / (config.battery_capacity * config.discharge_eff)


def hvac_mode(t_in: float, t_ref: float) -> str:
    """Thermostat mode: cool when at or above the setpoint, heat below it."""
    return "cool" if t_in >= t_ref else "heat"


def thermal_update(t_in: float, t_out: float, p_hvac: float, mode: str,
                   dt: float, config: BuildingConfig) -> float:
    """First-order zone update: envelope leakage plus HVAC thermal power."""
    if mode not in ("cool", "heat"):
        raise ValueError(f"unknown HVAC mode {mode!r}")
    sign = -1.0 if mode == "cool" else 1.0
    leak = config.thermal_conductance * (t_out - t_in)
    return t_in + (dt / config.thermal_capacitance) * (leak + sign * config.hvac_cop * p_hvac)


def step_buildings(states: list[BuildingState], actions: list[Action],
                   exo: ExoSnapshot, configs: list[BuildingConfig],
                   dt: float) -> list[StepOutcome]:
    """Advance every building one step under already-shielded actions.

    There is no physical cross-coupling: outcomes equal independent
    single-building steps; coupling exists only through the grid constraint
    and the reward, which are handled elsewhere.
    """
    if not (len(states) == len(actions) == len(configs) == len(exo.load)):
        raise ConfigError("states, actions, configs, and exogenous data disagree on N")
    outcomes = []
    for i, (state, action, config) in enumerate(zip(states, actions, configs)):
        soc_next, _ = soc_update(state.soc, action.p_batt, dt, config)
        mode = hvac_mode(state.t_in, config.t_ref)
        t_in_next = thermal_update(state.t_in, exo.t_out, action.p_hvac, mode, dt, config)
        net = net_consumption(float(exo.load[i]), action.p_hvac, action.p_batt,
                              float(exo.solar[i]))
        outcomes.append(StepOutcome(
            next_state=BuildingState(soc=soc_next, t_in=t_in_next, prev_net=net),
            net=net,
            reward_inputs=RewardInputs(
                net=net, prev_net=state.prev_net, solar=float(exo.solar[i]),
                t_in=t_in_next, price=exo.price, carbon=exo.carbon,
            ),
        ))
    return outcomes


class Environment:
    """Steps a building cluster through one exogenous series.

    A cold-wave capacity derating attached to the series is applied to the
    building configs at construction, so dynamics and safety checks see the
    same effective capacity. Owns no global state; independent instances may
    run concurrently.
    """

    def __init__(self, configs: list[BuildingConfig], series: ExogenousSeries,
                 initial_soc: float = 0.5, initial_t_in: float | str = "t_ref"):
        if not configs:
            raise ConfigError("at least one building is required")
        ids = tuple(c.id for c in configs)
        if ids != series.building_ids:
            raise ConfigError(
                f"config ids {ids} do not match series ids {series.building_ids}")
        if series.capacity_derating != 1.0:
            configs = [replace(c, battery_capacity=c.battery_capacity * series.capacity_derating)
                       for c in configs]
        self.configs = list(configs)
        self.series = series
        self.dt = series.dt
        self._initial_soc = initial_soc
        self._initial_t_in = initial_t_in
        self.t = 0
        self.states: list[BuildingState] = []
        self.reset()

    @property
    def n_buildings(self) -> int:
        return len(self.configs)

    @property
    def horizon(self) -> int:
        return self.series.horizon

    @property
    def done(self) -> bool:
        return self.t >= self.horizon

    def _initial_state(self, config: BuildingConfig) -> BuildingState:
        soc = min(max(self._initial_soc, config.soc_min), config.soc_max)
        if self._initial_t_in == "t_ref":
            t_in = config.t_ref
        elif self._initial_t_in == "t_out":
            t_in = float(self.series.t_out[0])
        else:
            t_in = float(self._initial_t_in)
        return BuildingState(soc=soc, t_in=t_in, prev_net=0.0)

    def reset(self) -> list[BuildingState]:
        self.t = 0
        self.states = [self._initial_state(c) for c in self.configs]
        return list(self.states)

    def exo_now(self) -> ExoSnapshot:
        return self.series.at(self.t)

    def step(self, actions: list[Action]) -> list[StepOutcome]:
        exo = self.series.at(self.t)  # raises HorizonExceeded past the end
        outcomes = step_buildings(self.states, actions, exo, self.configs, self.dt)
        self.states = [o.next_state for o in outcomes]
        self.t += 1
        return outcomes
