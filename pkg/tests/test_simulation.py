import numpy as np
import pytest
from hypothesis import given, strategies as st

from stems.errors import ConfigError, HorizonExceeded
from stems.simulation import (Action, BuildingConfig, BuildingState, Environment,
                              ExogenousSeries, hvac_mode, net_consumption,
                              soc_update, step_buildings, thermal_update)


def make_config(**overrides) -> BuildingConfig:
    base = dict(id=0, building_type="residential", battery_capacity=10.0,
                battery_power_limit=5.0, p_building_max=12.0, hvac_power_max=4.0,
                hvac_cop=3.0, thermal_capacitance=2.0, thermal_conductance=0.5,
                t_ref=22.0, charge_eff=1.0, discharge_eff=1.0)
    base.update(overrides)
    return BuildingConfig(**base)


def make_series(horizon=4, n=1, dt=1.0, load=0.0, solar=0.0, t_out=22.0,
                price=0.2, carbon=0.4, derating=1.0) -> ExogenousSeries:
    return ExogenousSeries(
        dt=dt,
        non_shiftable_load=np.full((horizon, n), load),
        solar_gen=np.full((horizon, n), solar),
        t_out=np.full(horizon, t_out),
        price=np.full(horizon, price),
        carbon_intensity=np.full(horizon, carbon),
        building_ids=tuple(range(n)),
        capacity_derating=derating,
    )


class TestNetConsumption:
    def test_worked_example(self):
        assert net_consumption(3, 2, 1, 4) == 2

    def test_zero_case(self):
        assert net_consumption(0, 0, 0, 0) == 0

    def test_export_case(self):
        assert net_consumption(2, 1, -3, 5) == -5

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50),
           st.floats(-50, 50), st.floats(-10, 10))
    def test_linear_in_each_argument(self, b, h, batt, solar, delta):
        base = net_consumption(b, h, batt, solar)
        assert net_consumption(b + delta, h, batt, solar) == pytest.approx(base + delta)
        assert net_consumption(b, h + delta, batt, solar) == pytest.approx(base + delta)
        assert net_consumption(b, h, batt + delta, solar) == pytest.approx(base + delta)
        assert net_consumption(b, h, batt, solar + delta) == pytest.approx(base - delta)


class TestSocUpdate:
    def test_charge(self):
        soc, clamped = soc_update(0.5, 2.0, 1.0, make_config())
        assert soc == pytest.approx(0.7)
        assert not clamped

    def test_identity(self):
        soc, clamped = soc_update(0.5, 0.0, 1.0, make_config())
        assert soc == 0.5
        assert not clamped

    def test_charge_efficiency(self):
        soc, _ = soc_update(0.5, 2.0, 1.0, make_config(charge_eff=0.9))
        assert soc == pytest.approx(0.68)

    def test_discharge_efficiency_drains_more(self):
        soc, _ = soc_update(0.5, -2.0, 1.0, make_config(discharge_eff=0.8))
        assert soc == pytest.approx(0.5 - 2.0 / (10.0 * 0.8))

    def test_clamp_flag(self):
        soc, clamped = soc_update(0.9, 5.0, 1.0, make_config())
        assert soc == 1.0
        assert clamped


class TestThermalUpdate:
    def test_equilibrium_fixed_point(self):
        assert thermal_update(22.0, 22.0, 0.0, "cool", 1.0, make_config()) == 22.0

    def test_passive_drift(self):
        assert thermal_update(22.0, 30.0, 0.0, "cool", 1.0, make_config()) == pytest.approx(24.0)

    def test_cooling(self):
        # leak (dt/C)*U*(30-26) = 1, cooling (dt/C)*cop*p = 3: net -2
        assert thermal_update(26.0, 30.0, 2.0, "cool", 1.0, make_config()) == pytest.approx(24.0)

    def test_heating_sign(self):
        cold = thermal_update(18.0, 10.0, 1.0, "heat", 1.0, make_config())
        assert cold > thermal_update(18.0, 10.0, 0.0, "heat", 1.0, make_config())

    @given(st.floats(-10, 40), st.floats(-10, 40))
    def test_contraction_toward_outdoor(self, t_in, t_out):
        # dt*U/C = 0.25 < 1 here, so passive dynamics contract toward t_out
        cfg = make_config()
        t_next = thermal_update(t_in, t_out, 0.0, "cool", 1.0, cfg)
        assert abs(t_next - t_out) <= abs(t_in - t_out) + 1e-12

    def test_mode_selection(self):
        assert hvac_mode(25.0, 22.0) == "cool"
        assert hvac_mode(19.0, 22.0) == "heat"
        assert hvac_mode(22.0, 22.0) == "cool"


class TestStep:
    def test_zero_actions_only_thermal_drifts(self):
        series = make_series(t_out=30.0)
        states = [BuildingState(soc=0.5, t_in=22.0, prev_net=0.0)]
        out = step_buildings(states, [Action(0.0, 0.0)], series.at(0),
                             [make_config()], 1.0)[0]
        assert out.next_state.soc == 0.5
        assert out.next_state.t_in == pytest.approx(24.0)
        assert out.net == 0.0

    def test_composition(self):
        series = make_series(load=3.0, solar=0.0)
        states = [BuildingState(soc=0.5, t_in=22.0, prev_net=0.0)]
        out = step_buildings(states, [Action(p_batt=1.0, p_hvac=2.0)], series.at(0),
                             [make_config()], 1.0)[0]
        assert out.net == pytest.approx(6.0)
        assert out.next_state.soc == pytest.approx(0.6)

    def test_two_buildings_independent(self):
        series = make_series(n=2, load=1.5, solar=0.5, t_out=28.0)
        cfgs = [make_config(id=0), make_config(id=1, building_type="commercial")]
        states = [BuildingState(0.4, 21.0, 0.3), BuildingState(0.6, 25.0, -0.2)]
        actions = [Action(1.0, 0.5), Action(-2.0, 1.5)]
        joint = step_buildings(states, actions, series.at(0), cfgs, 1.0)
        for i in range(2):
            single_series = make_series(n=1, load=1.5, solar=0.5, t_out=28.0)
            alone = step_buildings([states[i]], [actions[i]], single_series.at(0),
                                   [make_config(id=0, building_type=cfgs[i].building_type)],
                                   1.0)[0]
            assert joint[i].net == pytest.approx(alone.net)
            assert joint[i].next_state.soc == pytest.approx(alone.next_state.soc)

    def test_prev_net_advances(self):
        series = make_series(load=2.0)
        env = Environment([make_config()], series)
        out = env.step([Action(0.0, 0.0)])
        assert out[0].next_state.prev_net == pytest.approx(2.0)
        out2 = env.step([Action(0.0, 1.0)])
        assert out2[0].reward_inputs.prev_net == pytest.approx(2.0)


class TestEnvironment:
    def test_horizon_exceeded(self):
        env = Environment([make_config()], make_series(horizon=2))
        env.step([Action(0.0, 0.0)])
        env.step([Action(0.0, 0.0)])
        with pytest.raises(HorizonExceeded):
            env.step([Action(0.0, 0.0)])

    def test_empty_building_set_rejected(self):
        with pytest.raises(ConfigError):
            Environment([], make_series())

    def test_mismatched_ids_rejected(self):
        with pytest.raises(ConfigError):
            Environment([make_config(id=3)], make_series())

    def test_cold_wave_derating_applied(self):
        env = Environment([make_config()], make_series(derating=0.85))
        assert env.configs[0].battery_capacity == pytest.approx(8.5)

    def test_config_invariants(self):
        with pytest.raises(ConfigError):
            make_config(soc_min=0.9, soc_max=0.1)
        with pytest.raises(ConfigError):
            make_config(battery_capacity=-1.0)
        with pytest.raises(ConfigError):
            make_config(charge_eff=1.5)
        with pytest.raises(ConfigError):
            make_config(building_type="factory")
