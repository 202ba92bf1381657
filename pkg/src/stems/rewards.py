"""Four-part step reward: economic, stability, comfort, renewable."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .shield import SafetySpec
from .simulation import BuildingConfig, RewardInputs


@dataclass(frozen=True)
class RewardWeights:
    mu: float = 1.0
    alpha_grid: float = 0.5
    alpha_build: float = 0.3
    beta_ramp: float = 0.2
    lambda_indoor: float = 0.4
    xi: float = 0.6

    def __post_init__(self):
        for name in ("mu", "alpha_grid", "alpha_build", "beta_ramp",
                     "lambda_indoor", "xi"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass(frozen=True)
class RewardComponents:
    economic: float
    stability: float
    comfort: float
    renewable: float

    @property
    def total(self) -> float:
        return self.economic + self.stability + self.comfort + self.renewable


def r_economic(e: float, v: float, mu: float, dt: float = 1.0) -> float:
    """Billing term; negative for imports, positive credit for exports."""
    return -mu * v * e * dt


def r_stability(e_i: float, e_prev_i: float, all_nets, weights: RewardWeights,
                p_building_max: float, p_grid_max: float) -> float:
    """Grid-level coordination bonus, building smoothness bonus, ramp penalty."""
    total_pos = float(np.sum(np.maximum(np.asarray(all_nets, dtype=float), 0.0)))
    grid = weights.alpha_grid * (1.0 - total_pos / p_grid_max) ** 2
    build = weights.alpha_build * (1.0 - abs(e_i) / p_building_max)
    ramp = weights.beta_ramp * abs(e_i - e_prev_i) / p_building_max
    return grid + build - ramp


def r_comfort(t_in: float, t_ref: float, lambda_indoor: float) -> float:
    return -lambda_indoor * (t_in - t_ref) ** 2


def r_renewable(p: float, e: float, xi: float) -> float:
    """Clean-energy utilization share; the 0/0 case counts as zero."""
    denom = p + max(0.0, e)
    if denom <= 0.0:
        return 0.0
    return xi * min(p / denom, 1.0)


def reward(inputs: RewardInputs, all_nets, config: BuildingConfig,
           weights: RewardWeights, spec: SafetySpec,
           dt: float = 1.0) -> tuple[float, RewardComponents]:
    """Total step reward for one building plus its four components."""
    components = RewardComponents(
        economic=r_economic(inputs.net, inputs.price, weights.mu, dt),
        stability=r_stability(inputs.net, inputs.prev_net, all_nets, weights,
                              spec.power_cap(config), spec.p_grid_max),
        comfort=r_comfort(inputs.t_in, config.t_ref, weights.lambda_indoor),
        renewable=r_renewable(inputs.solar, inputs.net, weights.xi),
    )
    return components.total, components
