import numpy as np
import pytest

from stems.agents import (ActorParams, CriticParams, Trajectory, act, action_box,
                          actor_update, advantage, critic_gradients, critic_update,
                          critic_values, log_probs, normalize_advantages,
                          policy_gradients)
from stems.simulation import Action

from test_simulation import make_config

REPR_DIM = 6


def small_actor(seed=0, hidden=(8, 8)) -> ActorParams:
    return ActorParams.init(REPR_DIM, make_config(), seed, hidden=hidden)


def small_critic(seed=0, hidden=(8, 8)) -> CriticParams:
    return CriticParams.init(REPR_DIM, seed, hidden=hidden)


class TestAct:
    def test_zero_noise_deterministic_mean(self):
        actor = small_actor()
        r = np.ones(REPR_DIM)
        a1, _ = act(r, actor, 0.0, np.random.default_rng(1))
        a2, _ = act(r, actor, 0.0, np.random.default_rng(2))
        assert a1 == a2

    def test_same_rng_state_same_sample(self):
        actor = small_actor()
        r = np.ones(REPR_DIM)
        a1, _ = act(r, actor, 1.0, np.random.default_rng(7))
        a2, _ = act(r, actor, 1.0, np.random.default_rng(7))
        assert a1 == a2

    def test_actions_inside_box(self):
        actor = small_actor()
        cfg = make_config()
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, _ = act(np.ones(REPR_DIM) * 5, actor, 2.0, rng)
            assert abs(a.p_batt) <= cfg.battery_power_limit
            assert 0.0 <= a.p_hvac <= cfg.hvac_power_max

    def test_monte_carlo_mean_at_box_center(self):
        # zero the output layer: pre-squash mean 0, squashed mean = box center
        actor = small_actor()
        actor.net.weights[-1][:] = 0.0
        actor.net.biases[-1][:] = 0.0
        rng = np.random.default_rng(11)
        n = 100_000
        samples = np.array([act(np.zeros(REPR_DIM), actor, 1.0, rng)[0].as_array()
                            for _ in range(n)])
        center, _ = action_box(make_config())
        se = samples.std(axis=0) / np.sqrt(n)
        np.testing.assert_array_less(np.abs(samples.mean(axis=0) - center), 3 * se)

    def test_log_prob_closure_matches_batch(self):
        actor = small_actor()
        r = np.random.default_rng(5).normal(size=REPR_DIM)
        a, log_prob = act(r, actor, 1.0, np.random.default_rng(6))
        expected = log_probs(actor, r[None, :], np.array([a.as_array()]))[0]
        assert log_prob(a) == pytest.approx(float(expected))

    def test_density_integrates_to_one(self):
        # 2-D trapezoid quadrature over the (open) action box
        actor = small_actor(seed=2)
        for w, b in zip(actor.net.weights, actor.net.biases):
            w *= 0.2           # keep the squashed mean well inside the box
        actor.log_std[:] = np.log(0.5)
        cfg = make_config()
        center, half = action_box(cfg)
        n = 700
        eps = 1e-9
        ax0 = np.linspace(center[0] - half[0] + eps, center[0] + half[0] - eps, n)
        ax1 = np.linspace(center[1] - half[1] + eps, center[1] + half[1] - eps, n)
        g0, g1 = np.meshgrid(ax0, ax1, indexing="ij")
        actions = np.column_stack([g0.ravel(), g1.ravel()])
        reps = np.tile(np.random.default_rng(9).normal(size=REPR_DIM), (n * n, 1))
        dens = np.exp(log_probs(actor, reps, actions)).reshape(n, n)
        mass = np.trapezoid(np.trapezoid(dens, ax1, axis=1), ax0)
        assert mass == pytest.approx(1.0, abs=0.02)


class TestAdvantage:
    def test_direct(self):
        assert advantage(1.0, 0.99, 2.5, 2.0) == pytest.approx(0.48)

    def test_bellman_fixed_point(self):
        v_next = 2.0
        r = 1.0
        v = r + 0.99 * v_next
        assert advantage(r, 0.99, v, v_next) == 0.0

    def test_terminal(self):
        assert advantage(1.0, 0.99, 0.3, 0.0) == pytest.approx(0.7)

    def test_normalization_guards(self):
        np.testing.assert_array_equal(normalize_advantages(np.array([3.0])), [0.0])
        out = normalize_advantages(np.array([1.0, 2.0, 3.0]))
        assert out.mean() == pytest.approx(0.0)
        assert out.std() == pytest.approx(1.0)


def traj_of(actor, reps, actions, rewards, gamma=0.99, critic=None):
    critic = critic or small_critic()
    values = critic_values(critic, reps)
    next_values = np.append(values[1:], 0.0)
    adv = rewards + gamma * next_values - values
    return Trajectory(reps=reps, raw_actions=actions, safe_actions=actions,
                      log_probs=log_probs(actor, reps, actions), rewards=rewards,
                      values=values, next_values=next_values, advantages=adv,
                      gamma=gamma)


class TestActorUpdate:
    def make_batch(self, m=12, seed=0):
        rng = np.random.default_rng(seed)
        reps = rng.normal(size=(m, REPR_DIM))
        cfg = make_config()
        actions = np.column_stack([
            rng.uniform(-cfg.battery_power_limit * 0.9, cfg.battery_power_limit * 0.9, m),
            rng.uniform(0.05, cfg.hvac_power_max * 0.95, m),
        ])
        return reps, actions

    def test_zero_advantages_no_op(self):
        actor = small_actor()
        reps, actions = self.make_batch()
        before = {k: v.copy() for k, v in actor.tensors().items()}
        traj = traj_of(actor, reps, actions, np.zeros(len(reps)))
        traj.advantages = np.zeros(len(reps))
        actor_update(traj, actor, lr=0.1)
        for k, v in actor.tensors().items():
            np.testing.assert_array_equal(v, before[k])

    def test_singleton_batch_no_op(self):
        actor = small_actor()
        reps, actions = self.make_batch(m=1)
        traj = traj_of(actor, reps, actions, np.array([5.0]))
        before = {k: v.copy() for k, v in actor.tensors().items()}
        actor_update(traj, actor, lr=0.1)
        for k, v in actor.tensors().items():
            np.testing.assert_array_equal(v, before[k])

    def test_finite_difference_gradients(self):
        actor = small_actor(seed=4)
        reps, actions = self.make_batch(seed=5)
        weights = np.random.default_rng(6).normal(size=len(reps))
        grads, d_reps, loss = policy_gradients(actor, reps, actions, weights)

        def loss_fn():
            return -float(np.mean(weights * log_probs(actor, reps, actions)))

        assert loss == pytest.approx(loss_fn())
        eps = 1e-5
        for name, tensor in actor.tensors().items():
            analytic = grads.tensors()[name]
            fd = np.zeros_like(tensor)
            it = np.nditer(tensor, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = tensor[idx]
                tensor[idx] = orig + eps
                up = loss_fn()
                tensor[idx] = orig - eps
                down = loss_fn()
                tensor[idx] = orig
                fd[idx] = (up - down) / (2 * eps)
                it.iternext()
            denom = max(np.linalg.norm(fd), np.linalg.norm(analytic), 1e-12)
            err = np.linalg.norm(fd - analytic) / denom
            assert err <= 1e-4, f"{name}: rel err {err:.2e}"

    def test_input_gradient_matches_fd(self):
        actor = small_actor(seed=4)
        reps, actions = self.make_batch(seed=7)
        weights = np.random.default_rng(8).normal(size=len(reps))
        _, d_reps, _ = policy_gradients(actor, reps, actions, weights)
        eps = 1e-6
        fd = np.zeros_like(reps)
        for i in range(reps.shape[0]):
            for j in range(reps.shape[1]):
                orig = reps[i, j]
                reps[i, j] = orig + eps
                up = -float(np.mean(weights * log_probs(actor, reps, actions)))
                reps[i, j] = orig - eps
                down = -float(np.mean(weights * log_probs(actor, reps, actions)))
                reps[i, j] = orig
                fd[i, j] = (up - down) / (2 * eps)
        np.testing.assert_allclose(d_reps, fd, rtol=1e-4, atol=1e-8)


class TestCriticUpdate:
    def test_perfect_critic_unchanged_loss_zero(self):
        critic = small_critic(seed=1)
        reps = np.random.default_rng(2).normal(size=(8, REPR_DIM))
        targets = critic_values(critic, reps)    # already perfect on the batch
        grads, _, loss = critic_gradients(critic, reps, targets)
        assert loss == 0.0
        for g in grads.tensors().values():
            np.testing.assert_allclose(g, 0.0, atol=1e-15)

    def test_converges_to_constant(self):
        # gamma = 0, constant reward c: regression optimum is V = c
        critic = small_critic(seed=3)
        rng = np.random.default_rng(4)
        reps = rng.normal(size=(32, REPR_DIM))
        c = 1.7
        targets = np.full(32, c)
        _, _, initial = critic_gradients(critic, reps, targets)
        for _ in range(800):
            grads, _, _ = critic_gradients(critic, reps, targets)
            for p, g in zip(critic.tensors().values(), grads.tensors().values()):
                p -= 0.05 * g
        _, _, final = critic_gradients(critic, reps, targets)
        assert final < 0.01 * initial
        assert np.abs(critic_values(critic, reps) - c).mean() < 0.1

    def test_finite_difference_gradients(self):
        critic = small_critic(seed=5)
        rng = np.random.default_rng(6)
        reps = rng.normal(size=(10, REPR_DIM))
        targets = rng.normal(size=10)
        grads, _, _ = critic_gradients(critic, reps, targets)

        def loss_fn():
            v = critic_values(critic, reps)
            return float(np.mean((v - targets) ** 2))

        eps = 1e-5
        for name, tensor in critic.tensors().items():
            analytic = grads.tensors()[name]
            fd = np.zeros_like(tensor)
            it = np.nditer(tensor, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = tensor[idx]
                tensor[idx] = orig + eps
                up = loss_fn()
                tensor[idx] = orig - eps
                down = loss_fn()
                tensor[idx] = orig
                fd[idx] = (up - down) / (2 * eps)
                it.iternext()
            denom = max(np.linalg.norm(fd), np.linalg.norm(analytic), 1e-12)
            err = np.linalg.norm(fd - analytic) / denom
            assert err <= 1e-4, f"{name}: rel err {err:.2e}"

    def test_critic_update_uses_td_targets(self):
        critic = small_critic(seed=7)
        actor = small_actor(seed=8)
        rng = np.random.default_rng(9)
        reps = rng.normal(size=(6, REPR_DIM))
        actions = np.column_stack([rng.uniform(-1, 1, 6), rng.uniform(0.1, 2, 6)])
        traj = traj_of(actor, reps, actions, rng.normal(size=6), critic=critic)
        manual = CriticParams(net=type(critic.net)(
            weights=[w.copy() for w in critic.net.weights],
            biases=[b.copy() for b in critic.net.biases]))
        grads, _, _ = critic_gradients(manual, reps, traj.td_targets())
        for p, g in zip(manual.tensors().values(), grads.tensors().values()):
            p -= 0.01 * g
        critic_update(traj, critic, lr=0.01)
        for a, b in zip(critic.tensors().values(), manual.tensors().values()):
            np.testing.assert_allclose(a, b, atol=1e-14)
