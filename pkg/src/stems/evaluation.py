"""Deterministic episode rollouts for evaluation and auditing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import act
from .baseline import RuleSchedule, rule_based_policy
from .bundle import Bundle
from .encoder import StateHistory, encode
from .graph import BuildingGraph, node_features_all
from .metrics import VIOLATION_TOL, EpisodeRecord
from .rewards import RewardWeights, reward
from .shield import SafetySpec, shield_all
from .simulation import Action, Environment, net_consumption, soc_update_unclamped


class RuleBasedController:
    """Adapter running the time-of-use / deadband rule for every building."""

    def __init__(self, schedule: RuleSchedule | None = None):
        self.schedule = schedule or RuleSchedule()

    def reset(self) -> None:
        pass

    def __call__(self, env: Environment, states) -> list[Action]:
        exo = env.exo_now()
        hour = (env.t * env.dt) % 24.0
        return [rule_based_policy(s, hour, exo.t_out, c, self.schedule, env.dt)
                for s, c in zip(states, env.configs)]


class RandomController:
    """Uniform actions over each device box; the shield-stress workload."""

    def __init__(self, seed: int):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def reset(self) -> None:
        self.rng = np.random.default_rng(self.seed)

    def __call__(self, env: Environment, states) -> list[Action]:
        actions = []
        for c in env.configs:
            p_b = self.rng.uniform(-c.battery_power_limit, c.battery_power_limit)
            p_h = self.rng.uniform(0.0, c.hvac_power_max)
            actions.append(Action(p_batt=float(p_b), p_hvac=float(p_h)))
        return actions


class TrainedController:
    """Runs the trained encoder + actors; noise-free unless asked otherwise."""

    def __init__(self, bundle: Bundle, graph: BuildingGraph, noise_std: float = 0.0,
                 rng: np.random.Generator | None = None):
        self.bundle = bundle
        self.graph = graph
        self.noise_std = noise_std
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.histories: list[StateHistory] = []

    def reset(self) -> None:
        self.histories = [StateHistory(self.bundle.encoder.window)
                          for _ in range(self.graph.n)]

    def __call__(self, env: Environment, states) -> list[Action]:
        if not self.histories:
            self.reset()
        exo = env.exo_now()
        feats = node_features_all(states, exo, env.configs, self.bundle.stats)
        for i, h in enumerate(self.histories):
            h.push(feats[i])
        reps, _ = encode(self.graph, self.histories, self.bundle.encoder)
        return [act(reps[i], self.bundle.actors[i], self.noise_std, self.rng)[0]
                for i in range(env.n_buildings)]


@dataclass
class EpisodeInfo:
    record: EpisodeRecord
    reward_total: float              # summed over steps, averaged over buildings
    shield_kinds: dict[str, int]


def _flag_violations(states, actions, configs, spec: SafetySpec, exo, dt):
    battery = np.zeros(len(states), dtype=bool)
    power = np.zeros(len(states), dtype=bool)
    nets = np.empty(len(states))
    for i, (state, action, config) in enumerate(zip(states, actions, configs)):
        soc_next = soc_update_unclamped(state.soc, action.p_batt, dt, config)
        battery[i] = (soc_next > config.soc_max + VIOLATION_TOL
                      or soc_next < config.soc_min - VIOLATION_TOL)
        nets[i] = net_consumption(float(exo.load[i]), action.p_hvac,
                                  action.p_batt, float(exo.solar[i]))
        power[i] = abs(nets[i]) > config.p_building_max + VIOLATION_TOL
    grid = float(np.sum(np.maximum(nets, 0.0))) > spec.p_grid_max + VIOLATION_TOL
    return battery, power, grid


def run_episode(env: Environment, controller, safety: SafetySpec,
                weights: RewardWeights, shielded: bool = True,
                horizon: int | None = None) -> EpisodeInfo:
    """Roll one episode and collect the record the metric suite consumes."""
    horizon = horizon if horizon is not None else env.horizon
    states = env.reset()
    controller.reset()
    n = env.n_buildings

    nets = np.empty((horizon, n))
    t_in = np.empty((horizon, n))
    price = np.empty(horizon)
    carbon = np.empty(horizon)
    battery_v = np.zeros((horizon, n), dtype=bool)
    power_v = np.zeros((horizon, n), dtype=bool)
    grid_v = np.zeros(horizon, dtype=bool)
    kinds = {"passed": 0, "projected": 0, "emergency": 0}
    reward_total = 0.0

    for t in range(horizon):
        exo = env.exo_now()
        proposed = [a.clamped(c) for a, c in zip(controller(env, states), env.configs)]
        if shielded:
            results = shield_all(states, proposed, env.configs, safety, exo, env.dt)
            actions = [r.safe_action for r in results]
            for r in results:
                kinds[r.kind] += 1
        else:
            actions = proposed
        battery_v[t], power_v[t], grid_v[t] = _flag_violations(
            states, actions, env.configs, safety, exo, env.dt)

        outcomes = env.step(actions)
        states = [o.next_state for o in outcomes]
        step_nets = np.array([o.net for o in outcomes])
        nets[t] = step_nets
        t_in[t] = [o.next_state.t_in for o in outcomes]
        price[t] = exo.price
        carbon[t] = exo.carbon
        for i, out in enumerate(outcomes):
            total, _ = reward(out.reward_inputs, step_nets, env.configs[i],
                              weights, safety, env.dt)
            reward_total += total / n

    record = EpisodeRecord(dt=env.dt, nets=nets, t_in=t_in, price=price,
                           carbon=carbon, battery_violation=battery_v,
                           power_violation=power_v, grid_violation=grid_v)
    return EpisodeInfo(record=record, reward_total=reward_total, shield_kinds=kinds)
