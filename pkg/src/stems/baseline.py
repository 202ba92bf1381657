"""Rule-based controller: time-of-use battery schedule plus thermostat
deadband, the anchor for metric normalization."""

from __future__ import annotations

from dataclasses import dataclass

from .simulation import Action, BuildingConfig, BuildingState


@dataclass(frozen=True)
class RuleSchedule:
    charge_hours: tuple[float, float] = (0.0, 6.0)       # half-open [start, end)
    discharge_hours: tuple[float, float] = (17.0, 21.0)
    deadband: float = 1.0                                # degC around t_ref


def _in_window(hour: float, window: tuple[float, float]) -> bool:
    start, end = window
    if start <= end:
        return start <= hour < end
    return hour >= start or hour < end  # window wrapping midnight


def rule_based_policy(state: BuildingState, hour_of_day: float, t_out: float,
                      config: BuildingConfig, schedule: RuleSchedule,
                      dt: float = 1.0) -> Action:
    """Charge off-peak / discharge on-peak at the largest SOC-safe rate;
    run HVAC at full power when outside the setpoint deadband."""
    p_batt = 0.0
    if _in_window(hour_of_day, schedule.charge_hours):
        room = (config.soc_max - state.soc) * config.battery_capacity / (config.charge_eff * dt)
        p_batt = min(config.battery_power_limit, max(room, 0.0))
    elif _in_window(hour_of_day, schedule.discharge_hours):
        room = (state.soc - config.soc_min) * config.battery_capacity * config.discharge_eff / dt
        p_batt = -min(config.battery_power_limit, max(room, 0.0))

    error = state.t_in - config.t_ref
    p_hvac = config.hvac_power_max if abs(error) > schedule.deadband else 0.0
    return Action(p_batt=p_batt, p_hvac=p_hvac)
