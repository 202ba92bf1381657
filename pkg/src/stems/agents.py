"""Per-building actor-critic networks on top of the shared representations.

Actors output a pre-squash Gaussian mean; samples are pushed through a tanh
squash into the device action box, and the log-density carries the matching
change-of-variables correction so it stays differentiable at any action in
the box, including ones the shield moved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import glorot_uniform
from .simulation import Action, BuildingConfig

LOG_STD_MIN, LOG_STD_MAX = -5.0, 1.0
_SQUASH_CLIP = 1.0 - 1e-6
ACTION_DIM = 2


@dataclass
class MLP:
    """Fully connected tanh network with a linear output layer."""

    weights: list[np.ndarray]   # layer l: (d_out, d_in)
    biases: list[np.ndarray]

    @classmethod
    def init(cls, in_dim: int, hidden: tuple[int, ...], out_dim: int,
             rng: np.random.Generator) -> "MLP":
        dims = [in_dim, *hidden, out_dim]
        weights = [glorot_uniform(rng, (dims[i + 1], dims[i])) for i in range(len(dims) - 1)]
        biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
        return cls(weights=weights, biases=biases)

    def forward(self, x: np.ndarray):
        """Returns output (M, out_dim) and the activation cache."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        acts = [x]
        h = x
        for l in range(len(self.weights) - 1):
            h = np.tanh(h @ self.weights[l].T + self.biases[l])
            acts.append(h)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out, acts

    def backward(self, acts: list[np.ndarray], d_out: np.ndarray):
        """Gradients for all layers plus the input, given d(loss)/d(output)."""
        grads_w = [np.empty(0)] * len(self.weights)
        grads_b = [np.empty(0)] * len(self.biases)
        d = np.atleast_2d(d_out)
        for l in range(len(self.weights) - 1, -1, -1):
            grads_w[l] = d.T @ acts[l]
            grads_b[l] = d.sum(axis=0)
            d = d @ self.weights[l]
            if l > 0:
                d = d * (1.0 - acts[l] ** 2)   # tanh derivative via stored activation
        return grads_w, grads_b, d

    def tensors(self, prefix: str = "") -> dict[str, np.ndarray]:
        named = {}
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            named[f"{prefix}w{l}"] = w
            named[f"{prefix}b{l}"] = b
        return named


def action_box(config: BuildingConfig) -> tuple[np.ndarray, np.ndarray]:
    """(center, half-width) of the device box for (p_batt, p_hvac)."""
    center = np.array([0.0, config.hvac_power_max / 2.0])
    half = np.array([config.battery_power_limit, config.hvac_power_max / 2.0])
    return center, half


@dataclass
class ActorParams:
    net: MLP
    log_std: np.ndarray          # (ACTION_DIM,), state independent
    box_center: np.ndarray
    box_half: np.ndarray

    @classmethod
    def init(cls, repr_dim: int, config: BuildingConfig, seed: int,
             hidden: tuple[int, ...] = (128, 128),
             initial_log_std: float = -0.7,
             initial_hvac_bias: float = -1.0) -> "ActorParams":
        """initial_hvac_bias biases the pre-squash HVAC mean low so the
        untrained policy idles near off instead of at half power."""
        rng = np.random.default_rng(seed)
        center, half = action_box(config)
        net = MLP.init(repr_dim, hidden, ACTION_DIM, rng)
        net.biases[-1][1] = initial_hvac_bias
        return cls(net=net, log_std=np.full(ACTION_DIM, initial_log_std),
                   box_center=center, box_half=half)

    def std(self) -> np.ndarray:
        return np.exp(np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX))

    def tensors(self) -> dict[str, np.ndarray]:
        named = self.net.tensors("net.")
        named["log_std"] = self.log_std
        return named


@dataclass
class CriticParams:
    net: MLP

    @classmethod
    def init(cls, repr_dim: int, seed: int,
             hidden: tuple[int, ...] = (128, 128)) -> "CriticParams":
        return cls(net=MLP.init(repr_dim, hidden, 1, np.random.default_rng(seed)))

    def tensors(self) -> dict[str, np.ndarray]:
        return self.net.tensors("net.")


def _squash(u: np.ndarray, center: np.ndarray, half: np.ndarray) -> np.ndarray:
    return center + half * np.tanh(u)


def _unsquash(a: np.ndarray, center: np.ndarray, half: np.ndarray) -> np.ndarray:
    ratio = np.clip((a - center) / half, -_SQUASH_CLIP, _SQUASH_CLIP)
    return np.arctanh(ratio)


def act(r: np.ndarray, actor: ActorParams, noise_std: float,
        rng: np.random.Generator):
    """Sample one action; returns (Action, log_prob callable).

    noise_std scales the policy's own standard deviation during rollout;
    zero collapses to the deterministic squashed mean.
    """
    mean, _ = actor.net.forward(r)
    mean = mean[0]
    sigma = actor.std() * noise_std
    u = mean + sigma * rng.standard_normal(ACTION_DIM) if noise_std > 0 else mean
    a = _squash(u, actor.box_center, actor.box_half)
    action = Action(p_batt=float(a[0]), p_hvac=float(a[1]))

    def log_prob(query: Action) -> float:
        return float(log_probs(actor, np.atleast_2d(r), np.array([query.as_array()]))[0])

    return action, log_prob


def log_probs(actor: ActorParams, reps: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Log-density of squashed actions under the policy, batched over rows."""
    mean, _ = actor.net.forward(reps)
    sigma = actor.std()
    u = _unsquash(actions, actor.box_center, actor.box_half)
    gauss = (-0.5 * ((u - mean) / sigma) ** 2 - np.log(sigma)
             - 0.5 * np.log(2.0 * np.pi))
    jac = np.log(actor.box_half * (1.0 - np.tanh(u) ** 2))
    return np.sum(gauss - jac, axis=1)


@dataclass
class ActorGrads:
    net_w: list[np.ndarray]
    net_b: list[np.ndarray]
    log_std: np.ndarray

    def tensors(self) -> dict[str, np.ndarray]:
        named = {}
        for l, (w, b) in enumerate(zip(self.net_w, self.net_b)):
            named[f"net.w{l}"] = w
            named[f"net.b{l}"] = b
        named["log_std"] = self.log_std
        return named


@dataclass
class CriticGrads:
    net_w: list[np.ndarray]
    net_b: list[np.ndarray]

    def tensors(self) -> dict[str, np.ndarray]:
        named = {}
        for l, (w, b) in enumerate(zip(self.net_w, self.net_b)):
            named[f"net.w{l}"] = w
            named[f"net.b{l}"] = b
        return named


def policy_gradients(actor: ActorParams, reps: np.ndarray, actions: np.ndarray,
                     weights: np.ndarray):
    """Gradients of the policy-gradient loss -mean(w * log pi(a|r)).

    Returns (ActorGrads, d_loss/d_reps, loss). Weights are usually the
    normalized advantages evaluated at the executed safe actions.
    """
    reps = np.atleast_2d(reps)
    m = reps.shape[0]
    mean, acts = actor.net.forward(reps)
    sigma = actor.std()
    u = _unsquash(np.atleast_2d(actions), actor.box_center, actor.box_half)

    logp = (np.sum(-0.5 * ((u - mean) / sigma) ** 2 - np.log(sigma)
                   - 0.5 * np.log(2.0 * np.pi)
                   - np.log(actor.box_half * (1.0 - np.tanh(u) ** 2)), axis=1))
    loss = -float(np.mean(weights * logp))

    # d(-w/m * logp)/d mean and /d log_std; squash correction has no params.
    w_col = (weights / m)[:, None]
    d_mean = -w_col * (u - mean) / sigma ** 2
    inside = (actor.log_std > LOG_STD_MIN) & (actor.log_std < LOG_STD_MAX)
    d_log_std = -np.sum(w_col * (((u - mean) / sigma) ** 2 - 1.0), axis=0) * inside
    grads_w, grads_b, d_reps = actor.net.backward(acts, d_mean)
    return ActorGrads(net_w=grads_w, net_b=grads_b, log_std=d_log_std), d_reps, loss


def critic_values(critic: CriticParams, reps: np.ndarray) -> np.ndarray:
    out, _ = critic.net.forward(np.atleast_2d(reps))
    return out[:, 0]


def critic_gradients(critic: CriticParams, reps: np.ndarray, targets: np.ndarray):
    """Gradients of mean squared TD error with the target held fixed.

    Returns (CriticGrads, d_loss/d_reps, loss).
    """
    reps = np.atleast_2d(reps)
    m = reps.shape[0]
    out, acts = critic.net.forward(reps)
    values = out[:, 0]
    err = values - np.asarray(targets, dtype=float)
    loss = float(np.mean(err ** 2))
    d_out = (2.0 * err / m)[:, None]
    grads_w, grads_b, d_reps = critic.net.backward(acts, d_out)
    return CriticGrads(net_w=grads_w, net_b=grads_b), d_reps, loss


def advantage(reward: float, gamma: float, v: float, v_next: float) -> float:
    """One-step advantage; terminal steps pass v_next = 0."""
    return reward + gamma * v_next - v


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance batch normalization; singletons map to zero."""
    adv = np.asarray(adv, dtype=float)
    centered = adv - adv.mean()
    return centered / max(float(adv.std()), 1e-8)


@dataclass
class Trajectory:
    """One building's episode: everything its updates need."""

    reps: np.ndarray           # (T, repr_dim)
    raw_actions: np.ndarray    # (T, 2)
    safe_actions: np.ndarray   # (T, 2)
    log_probs: np.ndarray      # (T,), at the safe actions
    rewards: np.ndarray        # (T,)
    values: np.ndarray         # (T,)
    next_values: np.ndarray    # (T,), 0 at the terminal step
    advantages: np.ndarray     # (T,)
    gamma: float = 0.99

    def td_targets(self) -> np.ndarray:
        return self.rewards + self.gamma * self.next_values


def actor_update(traj: Trajectory, actor: ActorParams, lr: float) -> ActorParams:
    """One ascent step of the policy objective on the trajectory batch."""
    weights = normalize_advantages(traj.advantages)
    grads, _, _ = policy_gradients(actor, traj.reps, traj.safe_actions, weights)
    for param, grad in zip(actor.tensors().values(), grads.tensors().values()):
        param -= lr * grad
    return actor


def critic_update(traj: Trajectory, critic: CriticParams, lr: float) -> CriticParams:
    """One descent step on the TD regression loss (targets held fixed)."""
    grads, _, _ = critic_gradients(critic, traj.reps, traj.td_targets())
    for param, grad in zip(critic.tensors().values(), grads.tensors().values()):
        param -= lr * grad
    return critic
