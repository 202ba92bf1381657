"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines;
the desk-scale training criterion dominates the runtime (minutes, not hours).
"""

import time

import numpy as np
import pytest

from stems import runconfig
from stems.bundle import make_bundle
from stems.cli import build_series, main, make_environment
from stems.encoder import EncoderConfig, EncoderParams, StateHistory, \
    attention_weights, encode, encoder_backward
from stems.evaluation import (RandomController, RuleBasedController,
                              TrainedController, run_episode)
from stems.graph import GraphParams, build_graph
from stems.metrics import episode_metrics, normalize
from stems.presets import default_buildings, desk_config, standard_config
from stems.rewards import r_comfort, r_economic, r_renewable, r_stability, RewardWeights
from stems.scenarios import apply_extreme_weather, generate_scenario
from stems.shield import SafetySpec, ShieldContext, project, verify
from stems.simulation import Action, BuildingState
from stems.training import TrainConfig, train

from test_agents import small_actor, small_critic
from test_encoder import fd_check_encoder, random_histories, small_graph
from test_rewards_metrics import record_of
from test_shield import brute_force_project
from test_cli import tiny_run_config, write_config


def report(criterion: int, name: str) -> None:
    print(f"\nACCEPTANCE {criterion} ({name}): PASS")


def test_01_shield_soundness_year_long():
    cfg = standard_config()
    series = build_series(cfg)
    assert series.horizon == 8760 and len(cfg.buildings) == 8

    t0 = time.perf_counter()
    env = make_environment(cfg, series)
    shielded = run_episode(env, RandomController(seed=0), cfg.safety,
                           cfg.reward_weights, shielded=True)
    elapsed = time.perf_counter() - t0
    rec = shielded.record
    assert not rec.battery_violation.any(), "battery bound breached under shield"
    assert not rec.power_violation.any(), "power cap breached under shield"
    assert not rec.grid_violation.any(), "grid cap breached under shield"

    env2 = make_environment(cfg, series)
    raw = run_episode(env2, RandomController(seed=0), cfg.safety,
                      cfg.reward_weights, shielded=False)
    unshielded_rate = episode_metrics(
        raw.record, families=("battery", "power", "grid")).safety_violation_rate
    assert unshielded_rate > 0.0
    assert elapsed < 60.0, f"shielded episode took {elapsed:.1f}s (target < 60s)"
    report(1, f"shield soundness, 8x8760 in {elapsed:.1f}s, "
              f"unshielded rate {unshielded_rate:.3f}")


def test_02_projection_optimality_vs_brute_force():
    from test_simulation import make_config

    rng = np.random.default_rng(101)
    spec = SafetySpec(p_grid_max=100.0)
    checked = 0
    while checked < 100:
        cfg = make_config(
            battery_capacity=float(rng.uniform(1.0, 3.0)),
            battery_power_limit=float(rng.uniform(0.3, 0.5)),
            p_building_max=float(rng.uniform(0.5, 1.5)),
            hvac_power_max=float(rng.uniform(0.3, 0.5)),
            charge_eff=float(rng.uniform(0.8, 1.0)),
            discharge_eff=float(rng.uniform(0.8, 1.0)),
        )
        state = BuildingState(soc=float(rng.uniform(0.1, 0.9)), t_in=22.0, prev_net=0.0)
        ctx = ShieldContext(load=float(rng.uniform(0.0, 1.5)),
                            solar=float(rng.uniform(0.0, 1.5)), dt=1.0,
                            granted_headroom=float(rng.uniform(-0.2, 1.0)), spec=spec)
        raw = Action(float(rng.uniform(-0.6, 0.6)), float(rng.uniform(0.0, 0.6)))
        if verify(state, raw, cfg, ctx).all_satisfied:
            continue
        oracle, oracle_dist = brute_force_project(raw, state, cfg, ctx, resolution=1e-3)
        try:
            mine = project(raw, state, cfg, ctx)
        except Exception:
            assert oracle is None
            continue
        assert oracle is not None
        my_dist = float(np.linalg.norm(mine.as_array() - raw.as_array()))
        assert my_dist <= oracle_dist + 1e-12
        assert oracle_dist - my_dist <= 2e-3
        assert verify(state, mine, cfg, ctx).all_satisfied
        checked += 1
    report(2, f"projection optimal on {checked} infeasible pairs")


def test_03_gradient_correctness_all_networks():
    # encoder at the stated size: N=3 buildings, window T=4, hidden 8
    enc_cfg = EncoderConfig(hidden=8, layers=3, heads=2, head_dim=4, attn_dim=8,
                            repr_dim=6, window=4)
    graph = small_graph(n=3, seed=1)
    params = EncoderParams.init(5, enc_cfg, seed=2)
    hists = random_histories(3, enc_cfg.window, 5, seed=3)
    upstream = np.random.default_rng(4).normal(size=(3, enc_cfg.repr_dim))
    worst = fd_check_encoder(params, graph, hists, upstream, eps=1e-5)
    for name, err in worst.items():
        assert err <= 1e-4, f"encoder {name}: rel err {err:.2e}"

    from stems.agents import critic_gradients, critic_values, log_probs, \
        policy_gradients

    actor = small_actor(seed=5)
    rng = np.random.default_rng(6)
    reps = rng.normal(size=(8, 6))
    actions = np.column_stack([rng.uniform(-4.0, 4.0, 8), rng.uniform(0.2, 3.8, 8)])
    weights = rng.normal(size=8)
    a_grads, _, _ = policy_gradients(actor, reps, actions, weights)

    def actor_loss():
        return -float(np.mean(weights * log_probs(actor, reps, actions)))

    eps = 1e-5
    for name, tensor in actor.tensors().items():
        analytic = a_grads.tensors()[name]
        fd = np.zeros_like(tensor)
        it = np.nditer(tensor, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = tensor[idx]
            tensor[idx] = orig + eps
            up = actor_loss()
            tensor[idx] = orig - eps
            down = actor_loss()
            tensor[idx] = orig
            fd[idx] = (up - down) / (2 * eps)
            it.iternext()
        denom = max(np.linalg.norm(fd), np.linalg.norm(analytic), 1e-12)
        err = np.linalg.norm(fd - analytic) / denom
        assert err <= 1e-4, f"actor {name}: rel err {err:.2e}"

    critic = small_critic(seed=7)
    targets = rng.normal(size=8)
    c_grads, _, _ = critic_gradients(critic, reps, targets)

    def critic_loss():
        return float(np.mean((critic_values(critic, reps) - targets) ** 2))

    for name, tensor in critic.tensors().items():
        analytic = c_grads.tensors()[name]
        fd = np.zeros_like(tensor)
        it = np.nditer(tensor, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = tensor[idx]
            tensor[idx] = orig + eps
            up = critic_loss()
            tensor[idx] = orig - eps
            down = critic_loss()
            tensor[idx] = orig
            fd[idx] = (up - down) / (2 * eps)
            it.iternext()
        denom = max(np.linalg.norm(fd), np.linalg.norm(analytic), 1e-12)
        err = np.linalg.norm(fd - analytic) / denom
        assert err <= 1e-4, f"critic {name}: rel err {err:.2e}"
    report(3, "finite-difference checks, every tensor, rel err <= 1e-4")


def test_04_attention_normalization():
    enc_cfg = EncoderConfig(hidden=8, layers=2, heads=3, head_dim=4, attn_dim=8,
                            repr_dim=6, window=9)
    params = EncoderParams.init(7, enc_cfg, seed=11)
    hists = random_histories(4, enc_cfg.window, 7, seed=12)
    alpha = attention_weights(hists, params)
    np.testing.assert_allclose(alpha.sum(axis=-1), 1.0, atol=1e-6)

    uniform = StateHistory(enc_cfg.window)
    for _ in range(enc_cfg.window + 1):
        uniform.push(np.full(7, 0.42))
    alpha_u = attention_weights([uniform], params)
    np.testing.assert_allclose(alpha_u, 1.0 / (enc_cfg.window + 1), atol=1e-9)
    report(4, "attention rows sum to 1, uniform history exactly 1/(T+1)")


def test_05_reward_and_metric_arithmetic():
    assert r_economic(5.0, 0.2, 1.0, 1.0) == pytest.approx(-1.0)
    assert r_stability(5.0, 3.0, [5.0, 5.0], RewardWeights(),
                       p_building_max=10.0, p_grid_max=20.0) == pytest.approx(0.235)
    assert r_comfort(25.0, 22.0, 0.4) == pytest.approx(-3.6)
    assert r_renewable(4.0, 4.0, 0.6) == pytest.approx(0.3)

    m = episode_metrics(record_of([1.0, 3.0, 2.0], dt=8.0))
    assert m.ramping == pytest.approx(1.5)
    m = episode_metrics(record_of([5.0, 9.0, 7.0], dt=8.0))
    assert m.avg_daily_peak == pytest.approx(9.0)
    t_in = np.array([[22.0], [27.0], [25.0], [21.0]])
    with pytest.warns(UserWarning):
        m = episode_metrics(record_of([1.0] * 4, t_in=t_in))
    assert m.discomfort_proportion == pytest.approx(0.25)
    report(5, "economic -1.0, stability 0.235, comfort -3.6, renewable 0.3, "
              "ramping 1.5, peak 9, discomfort 0.25")


@pytest.mark.slow
def test_06_desk_scale_training_efficacy():
    cfg = desk_config()   # 5 buildings, 30 days, 200 episodes, 3 seeds
    assert len(cfg.buildings) == 5
    assert cfg.scenario.horizon == 24 * 30
    assert cfg.train.episodes == 200 and len(cfg.seeds) == 3
    series = build_series(cfg)
    graph = build_graph(cfg.buildings, cfg.graph)

    base = run_episode(make_environment(cfg, series), RuleBasedController(cfg.rule),
                       cfg.safety, cfg.reward_weights, shielded=False)
    base_m = episode_metrics(base.record)

    t0 = time.perf_counter()
    summaries = []
    for seed in cfg.seeds:
        env = make_environment(cfg, series)
        bundle = make_bundle(env.configs, series, cfg.encoder, seed,
                             cfg.actor_hidden, cfg.critic_hidden)
        tc = TrainConfig(**{**cfg.train.__dict__, "seed": seed})
        result = train(env, graph, bundle, cfg.safety, cfg.reward_weights, tc)
        rets = [r["mean_return"] for r in result.logs]
        first10, last10 = float(np.mean(rets[:10])), float(np.mean(rets[-10:]))
        assert last10 > first10, f"seed {seed}: no return improvement " \
                                 f"({first10:.1f} -> {last10:.1f})"
        assert all(r["violations"] == 0 for r in result.logs), \
            f"seed {seed}: shielded training logged violations"
        info = run_episode(make_environment(cfg, series),
                           TrainedController(result.bundle, graph),
                           cfg.safety, cfg.reward_weights, shielded=True)
        m = episode_metrics(info.record)
        assert m.cost <= 0.9 * base_m.cost, \
            f"seed {seed}: cost {m.cost:.1f} vs baseline {base_m.cost:.1f}"
        assert m.discomfort_proportion <= base_m.discomfort_proportion, \
            f"seed {seed}: discomfort {m.discomfort_proportion:.3f} vs " \
            f"baseline {base_m.discomfort_proportion:.3f}"
        summaries.append((seed, m.cost / base_m.cost, m.discomfort_proportion))
    elapsed = time.perf_counter() - t0
    assert elapsed < 1800.0, f"desk study took {elapsed:.0f}s (target < 30 min)"
    detail = ", ".join(f"seed{s}: cost x{c:.2f} discomfort {d:.3f}"
                       for s, c, d in summaries)
    report(6, f"desk-scale efficacy in {elapsed:.0f}s ({detail}, "
              f"baseline discomfort {base_m.discomfort_proportion:.3f})")


def test_07_normalization_identity():
    cfg = standard_config(horizon=24 * 7)
    series = build_series(cfg)
    info = run_episode(make_environment(cfg, series), RuleBasedController(cfg.rule),
                       cfg.safety, cfg.reward_weights, shielded=False)
    m = episode_metrics(info.record)
    norm = normalize(m, m)
    for field in ("cost", "emission", "avg_daily_peak", "consumption", "ramping"):
        assert getattr(norm, field) == 1.0, field
    report(7, "rule-based baseline normalizes to exactly 1.00 against itself")


def test_08_train_determinism(tmp_path):
    logs = []
    for name in ("run1", "run2"):
        out_dir = tmp_path / name
        cfg = tiny_run_config(out_dir, n=3, horizon=48, episodes=3, seeds=(0,))
        path = write_config(tmp_path, cfg, f"{name}.json")
        assert main(["train", "--config", str(path)]) == 0
        logs.append((out_dir / "train_log_seed0.csv").read_bytes())
    assert logs[0] == logs[1]
    report(8, "byte-identical training logs across reruns")


def test_09_extreme_weather_machinery():
    buildings = default_buildings(4)
    from stems.scenarios import ScenarioSpec
    spec = ScenarioSpec(building_types=tuple(b.building_type for b in buildings),
                        horizon=24 * 3)
    series = generate_scenario(spec, seed=5)

    hot = apply_extreme_weather(series, "heat_wave")
    assert np.all(hot.t_out >= 35.0) and np.all(hot.t_out <= 40.0)
    np.testing.assert_array_equal(hot.solar_gen, series.solar_gen * 1.2)
    np.testing.assert_array_equal(hot.non_shiftable_load,
                                  series.non_shiftable_load * 2.5)
    np.testing.assert_array_equal(hot.price, series.price)
    np.testing.assert_array_equal(hot.carbon_intensity, series.carbon_intensity)
    assert hot.capacity_derating == 1.0

    cold = apply_extreme_weather(series, "cold_wave")
    assert np.all(cold.t_out < -3.0)
    np.testing.assert_array_equal(cold.non_shiftable_load,
                                  series.non_shiftable_load * 2.8)
    np.testing.assert_array_equal(cold.solar_gen, series.solar_gen)
    assert cold.capacity_derating == 0.85
    env = make_environment(
        runconfig.RunConfig(buildings=buildings,
                            safety=SafetySpec(p_grid_max=30.0), scenario=spec,
                            train=TrainConfig(episodes=1), seeds=(0,)),
        cold)
    for raw, derated in zip(buildings, env.configs):
        assert derated.battery_capacity == pytest.approx(0.85 * raw.battery_capacity)
    report(9, "heat-wave and cold-wave perturbations exact, field by field")
