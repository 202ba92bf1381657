"""Multi-building energy management laboratory: simulator, spatial-temporal
graph encoder, CBF safety shield, and safety-constrained multi-agent training."""

from .simulation import (Action, BuildingConfig, BuildingState, Environment,
                         ExogenousSeries, StepOutcome, net_consumption,
                         soc_update, thermal_update)
from .scenarios import ScenarioSpec, apply_extreme_weather, generate_scenario, \
    load_timeseries_csv, write_timeseries_csv
from .graph import BuildingGraph, FeatureStats, GraphParams, build_graph, edge_weight
from .encoder import EncoderConfig, EncoderParams, StateHistory, encode, \
    encoder_backward, temporal_attention
from .shield import ConstraintEval, SafetySpec, ShieldResult, h_battery, h_grid, \
    h_power, project, shield_all, verify
from .rewards import RewardComponents, RewardWeights, reward
from .metrics import EpisodeMetrics, EpisodeRecord, episode_metrics, normalize
from .baseline import RuleSchedule, rule_based_policy
from .agents import ActorParams, CriticParams, Trajectory, act, advantage, \
    actor_update, critic_update
from .training import TrainConfig, TrainResult, train
from .bundle import Bundle, make_bundle
from .runconfig import RunConfig

__version__ = "0.1.0"
