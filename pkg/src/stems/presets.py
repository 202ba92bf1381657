"""Ready-made building fleets and run configurations.

The numbers are sized so that the zero-action system is always jointly
feasible (loads stay under the building and grid caps), which makes the
shield's sequential headroom allocation sound, while leaving enough slack
for aggressive raw policies to violate every constraint family unshielded.
"""

from __future__ import annotations

import numpy as np

from .encoder import EncoderConfig
from .graph import GraphParams
from .runconfig import RunConfig
from .scenarios import ScenarioSpec
from .shield import SafetySpec
from .simulation import BuildingConfig
from .training import TrainConfig

# Per-type device and envelope parameters. Thermal mass is deliberately small
# relative to HVAC size: the bang-bang baseline overshoots the comfort band,
# which a modulating policy can avoid.
_TYPE_PARAMS = {
    "residential": dict(battery_capacity=8.0, battery_power_limit=3.5,
                        p_building_max=12.0, hvac_power_max=2.6, hvac_cop=2.8,
                        thermal_capacitance=2.0, thermal_conductance=0.35),
    "commercial": dict(battery_capacity=18.0, battery_power_limit=6.0,
                       p_building_max=17.0, hvac_power_max=5.0, hvac_cop=3.0,
                       thermal_capacitance=3.8, thermal_conductance=0.6),
    "mixed": dict(battery_capacity=12.0, battery_power_limit=4.5,
                  p_building_max=14.0, hvac_power_max=3.4, hvac_cop=2.9,
                  thermal_capacitance=2.6, thermal_conductance=0.45),
}


def building_mix(n: int) -> list[str]:
    """Roughly 5:2:1 residential / commercial / mixed, matching a small
    neighborhood fleet."""
    if n <= 0:
        raise ValueError("n must be >= 1")
    n_com = max(n // 4, 1) if n >= 3 else 0
    n_mix = 1 if n >= 4 else 0
    n_res = n - n_com - n_mix
    return ["residential"] * n_res + ["commercial"] * n_com + ["mixed"] * n_mix


def default_buildings(n: int = 8, seed: int = 11,
                      types: list[str] | None = None) -> list[BuildingConfig]:
    types = types if types is not None else building_mix(n)
    rng = np.random.default_rng(seed)
    configs = []
    for i, kind in enumerate(types):
        loc = tuple(np.round(rng.uniform(0.0, 2.0, size=2), 3))
        configs.append(BuildingConfig(id=i, building_type=kind, t_ref=22.0,
                                      location=loc, charge_eff=0.95,
                                      discharge_eff=0.95, **_TYPE_PARAMS[kind]))
    return configs


def standard_config(n: int = 8, horizon: int = 8760, seeds=(0, 1, 2, 3, 4),
                    episodes: int = 50) -> RunConfig:
    """Year-long fleet used for shield audits and long evaluations."""
    buildings = default_buildings(n)
    return RunConfig(
        buildings=buildings,
        safety=SafetySpec(p_grid_max=5.6 * n),
        scenario=ScenarioSpec(building_types=tuple(b.building_type for b in buildings),
                              horizon=horizon),
        train=TrainConfig(episodes=episodes),
        graph=GraphParams(),
        encoder=EncoderConfig(),
        seeds=tuple(seeds),
    )


def desk_config(n: int = 5, days: int = 30, episodes: int = 200,
                seeds=(0, 1, 2)) -> RunConfig:
    """Desk-scale training study: small fleet, one month, minutes to train."""
    buildings = default_buildings(n)
    return RunConfig(
        buildings=buildings,
        safety=SafetySpec(p_grid_max=5.6 * n),
        scenario=ScenarioSpec(building_types=tuple(b.building_type for b in buildings),
                              horizon=24 * days),
        train=TrainConfig(
            episodes=episodes,
            optimizer="adam",
            lr_actor=2e-3,
            lr_critic=3e-3,
            lr_graph=1e-4,
            noise_std_start=1.0,
            noise_std_end=0.2,
        ),
        graph=GraphParams(),
        encoder=EncoderConfig(),
        seeds=tuple(seeds),
    )
