"""Safety-constrained multi-agent training loop.

Each episode: encode, act with exploration noise, shield, step, reward,
store; at episode end one batched gradient step per actor and critic, and
one shared-encoder step whose upstream gradients sum both losses over all
buildings and steps. Violations of the shielded constraint families are
counted every step and expected to stay at zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .agents import Trajectory, critic_gradients, critic_values, log_probs, \
    normalize_advantages, act, policy_gradients
from .bundle import Bundle
from .encoder import StateHistory, encode, encoder_backward, EncoderGrads
from .errors import ConfigError
from .graph import BuildingGraph, node_features_all
from .metrics import VIOLATION_TOL
from .optim import clip_global_norm, make_optimizer
from .rewards import RewardWeights, reward
from .shield import SafetySpec, shield_all
from .simulation import Environment

LOG_COLUMNS = ("episode", "mean_return", "economic", "stability", "comfort",
               "renewable", "cost", "emission", "violations")


@dataclass(frozen=True)
class TrainConfig:
    episodes: int
    horizon: int | None = None            # None: full scenario horizon
    gamma: float = 0.99
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_graph: float = 3e-4
    safety_adjust_interval: int = 10      # episodes between margin adjustments
    margin_initial: float = 0.0           # 0 disables the tightening schedule
    noise_std_start: float = 1.0
    noise_std_end: float | None = None    # None: constant
    optimizer: str = "sgd"
    grad_clip: float = 10.0
    seed: int = 0
    checkpoint_interval: int = 0          # 0: only the final checkpoint

    def __post_init__(self):
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        for name in ("lr_actor", "lr_critic", "lr_graph"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.safety_adjust_interval <= 0:
            raise ConfigError("safety_adjust_interval must be > 0")

    def noise_std(self, episode: int) -> float:
        if self.noise_std_end is None or self.episodes <= 1:
            return self.noise_std_start
        frac = episode / (self.episodes - 1)
        return self.noise_std_start + frac * (self.noise_std_end - self.noise_std_start)

    def margin(self, episode: int) -> float:
        """Linear tightening schedule toward zero, refreshed every interval."""
        if self.margin_initial <= 0.0:
            return 0.0
        k = self.safety_adjust_interval
        anchor = (episode // k) * k
        frac = anchor / max(self.episodes - 1, 1)
        return self.margin_initial * max(0.0, 1.0 - frac)


@dataclass
class TrainResult:
    bundle: Bundle
    logs: list[dict]
    wall_time_s: float


def _count_violations(states, results, configs, spec, exo, dt) -> int:
    """Building-steps breaching battery/power bounds, plus N per grid breach."""
    from .simulation import net_consumption, soc_update_unclamped

    count = 0
    nets = []
    for i, (state, res, config) in enumerate(zip(states, results, configs)):
        a = res.safe_action
        soc_next = soc_update_unclamped(state.soc, a.p_batt, dt, config)
        if soc_next > config.soc_max + VIOLATION_TOL or soc_next < config.soc_min - VIOLATION_TOL:
            count += 1
        net = net_consumption(float(exo.load[i]), a.p_hvac, a.p_batt, float(exo.solar[i]))
        if abs(net) > config.p_building_max + VIOLATION_TOL:
            count += 1
        nets.append(net)
    if float(np.sum(np.maximum(nets, 0.0))) > spec.p_grid_max + VIOLATION_TOL:
        count += len(states)
    return count


def train(env: Environment, graph: BuildingGraph, bundle: Bundle,
          safety: SafetySpec, weights: RewardWeights, cfg: TrainConfig,
          start_episode: int = 0, rng: np.random.Generator | None = None,
          on_episode_end=None) -> TrainResult:
    """Run the full training loop; returns the updated bundle and episode logs."""
    t_start = time.perf_counter()
    n = env.n_buildings
    horizon = cfg.horizon if cfg.horizon is not None else env.horizon
    if horizon > env.horizon:
        raise ConfigError(f"training horizon {horizon} exceeds scenario horizon {env.horizon}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    actor_opts = [make_optimizer(cfg.optimizer) for _ in range(n)]
    critic_opts = [make_optimizer(cfg.optimizer) for _ in range(n)]
    encoder_opt = make_optimizer(cfg.optimizer)
    logs: list[dict] = []

    for episode in range(start_episode, cfg.episodes):
        spec = replace(safety, margin=cfg.margin(episode))
        noise = cfg.noise_std(episode)
        states = env.reset()
        histories = [StateHistory(bundle.encoder.window) for _ in range(n)]

        reps_steps, caches = [], []
        safe_actions = np.empty((horizon, n, 2))
        raw_actions = np.empty((horizon, n, 2))
        rewards_arr = np.empty((horizon, n))
        comp_sums = np.zeros(4)
        cost = emission = 0.0
        violations = 0

        for t in range(horizon):
            exo = env.exo_now()
            feats = node_features_all(states, exo, env.configs, bundle.stats)
            for i in range(n):
                histories[i].push(feats[i])
            reps, cache = encode(graph, histories, bundle.encoder)
            reps_steps.append(reps)
            caches.append(cache)

            actions = []
            for i in range(n):
                a, _ = act(reps[i], bundle.actors[i], noise, rng)
                actions.append(a)
                raw_actions[t, i] = a.as_array()
            results = shield_all(states, actions, env.configs, spec, exo, env.dt)
            for i, res in enumerate(results):
                safe_actions[t, i] = res.safe_action.as_array()
            violations += _count_violations(states, results, env.configs, safety, exo, env.dt)

            prev_states = states
            outcomes = env.step([r.safe_action for r in results])
            states = [o.next_state for o in outcomes]
            nets = np.array([o.net for o in outcomes])
            for i, out in enumerate(outcomes):
                total, comps = reward(out.reward_inputs, nets, env.configs[i],
                                      weights, safety, env.dt)
                rewards_arr[t, i] = total
                comp_sums += np.array([comps.economic, comps.stability,
                                       comps.comfort, comps.renewable])
            total_net = float(nets.sum())
            cost += exo.price * max(0.0, total_net) * env.dt
            emission += exo.carbon * max(0.0, total_net) * env.dt

        # --- episode-end updates -------------------------------------------
        reps_all = np.stack(reps_steps)              # (T, N, repr)
        upstream = np.zeros_like(reps_all)
        for i in range(n):
            reps_i = reps_all[:, i, :]
            values = critic_values(bundle.critics[i], reps_i)
            next_values = np.append(values[1:], 0.0)
            adv = rewards_arr[:, i] + cfg.gamma * next_values - values
            traj = Trajectory(reps=reps_i, raw_actions=raw_actions[:, i],
                              safe_actions=safe_actions[:, i],
                              log_probs=log_probs(bundle.actors[i], reps_i,
                                                  safe_actions[:, i]),
                              rewards=rewards_arr[:, i], values=values,
                              next_values=next_values, advantages=adv,
                              gamma=cfg.gamma)

            a_grads, d_reps_a, _ = policy_gradients(
                bundle.actors[i], reps_i, traj.safe_actions,
                normalize_advantages(adv))
            c_grads, d_reps_c, _ = critic_gradients(
                bundle.critics[i], reps_i, traj.td_targets())
            upstream[:, i, :] = d_reps_a + d_reps_c

            a_named = a_grads.tensors()
            clip_global_norm(a_named, cfg.grad_clip)
            actor_opts[i].step(bundle.actors[i].tensors(), a_named, cfg.lr_actor)
            c_named = c_grads.tensors()
            clip_global_norm(c_named, cfg.grad_clip)
            critic_opts[i].step(bundle.critics[i].tensors(), c_named, cfg.lr_critic)

        enc_grads = EncoderGrads.zeros_like(bundle.encoder)
        for t in range(horizon):
            enc_grads.add_(encoder_backward(upstream[t], caches[t]))
        enc_named = enc_grads.tensors()
        clip_global_norm(enc_named, cfg.grad_clip)
        encoder_opt.step(bundle.encoder.tensors(), enc_named, cfg.lr_graph)

        row = {
            "episode": episode,
            "mean_return": float(rewards_arr.sum(axis=0).mean()),
            "economic": float(comp_sums[0] / n),
            "stability": float(comp_sums[1] / n),
            "comfort": float(comp_sums[2] / n),
            "renewable": float(comp_sums[3] / n),
            "cost": float(cost),
            "emission": float(emission),
            "violations": int(violations),
        }
        logs.append(row)
        if on_episode_end is not None:
            on_episode_end(episode, bundle, rng, row)

    return TrainResult(bundle=bundle, logs=logs,
                       wall_time_s=time.perf_counter() - t_start)
