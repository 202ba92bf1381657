"""One JSON config file drives every command.

Keys mirror the dataclass field names exactly; parse -> serialize -> parse is
an identity. Scalar CLI flags override file values, file values override
defaults.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .baseline import RuleSchedule
from .encoder import EncoderConfig
from .errors import ConfigError
from .graph import GraphParams
from .rewards import RewardWeights
from .scenarios import ScenarioSpec
from .shield import SafetySpec
from .simulation import BuildingConfig
from .training import TrainConfig

OUT_DIR_ENV = "STEMS_OUT_DIR"


@dataclass
class RunConfig:
    buildings: list[BuildingConfig]
    safety: SafetySpec
    train: TrainConfig
    scenario: ScenarioSpec | None = None
    timeseries_csv: str | None = None
    extreme_weather: str | None = None        # heat_wave | cold_wave
    graph: GraphParams = field(default_factory=GraphParams)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    actor_hidden: tuple[int, ...] = (128, 128)
    critic_hidden: tuple[int, ...] = (128, 128)
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    rule: RuleSchedule = field(default_factory=RuleSchedule)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    scenario_seed: int = 0
    out_dir: str | None = None
    initial_soc: float = 0.5
    initial_t_in: float | str = "t_ref"

    def __post_init__(self):
        if not self.buildings:
            raise ConfigError("at least one building is required")
        ids = [b.id for b in self.buildings]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate building ids: {ids}")
        if self.scenario is None and self.timeseries_csv is None:
            raise ConfigError("either scenario or timeseries_csv must be set")
        if self.extreme_weather not in (None, "heat_wave", "cold_wave"):
            raise ConfigError(f"unknown extreme_weather {self.extreme_weather!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        self.seeds = tuple(int(s) for s in self.seeds)
        self.actor_hidden = tuple(int(h) for h in self.actor_hidden)
        self.critic_hidden = tuple(int(h) for h in self.critic_hidden)

    def resolve_out_dir(self) -> Path:
        out = self.out_dir or os.environ.get(OUT_DIR_ENV) or "."
        return Path(out)


def _as_dict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}


def to_dict(cfg: RunConfig) -> dict:
    data = {
        "buildings": [_as_dict(b) for b in cfg.buildings],
        "safety": _as_dict(cfg.safety),
        "train": _as_dict(cfg.train),
        "scenario": _as_dict(cfg.scenario) if cfg.scenario is not None else None,
        "timeseries_csv": cfg.timeseries_csv,
        "extreme_weather": cfg.extreme_weather,
        "graph": _as_dict(cfg.graph),
        "encoder": _as_dict(cfg.encoder),
        "actor_hidden": list(cfg.actor_hidden),
        "critic_hidden": list(cfg.critic_hidden),
        "reward_weights": _as_dict(cfg.reward_weights),
        "rule": _as_dict(cfg.rule),
        "seeds": list(cfg.seeds),
        "scenario_seed": cfg.scenario_seed,
        "out_dir": cfg.out_dir,
        "initial_soc": cfg.initial_soc,
        "initial_t_in": cfg.initial_t_in,
    }
    for b in data["buildings"]:
        b["location"] = list(b["location"])
    data["rule"]["charge_hours"] = list(data["rule"]["charge_hours"])
    data["rule"]["discharge_hours"] = list(data["rule"]["discharge_hours"])
    if data["scenario"] is not None:
        data["scenario"]["building_types"] = list(data["scenario"]["building_types"])
    data["train"] = dict(data["train"])
    return data


def _build(cls, data: dict, tuple_fields: tuple[str, ...] = ()):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = dict(data)
    for name in tuple_fields:
        if name in kwargs and kwargs[name] is not None:
            kwargs[name] = tuple(kwargs[name])
    return cls(**kwargs)


def from_dict(data: dict) -> RunConfig:
    try:
        buildings = [_build(BuildingConfig, b, tuple_fields=("location",))
                     for b in data["buildings"]]
        scenario = data.get("scenario")
        return RunConfig(
            buildings=buildings,
            safety=_build(SafetySpec, data["safety"]),
            train=_build(TrainConfig, data["train"]),
            scenario=(_build(ScenarioSpec, scenario, tuple_fields=("building_types", "peak_hours"))
                      if scenario is not None else None),
            timeseries_csv=data.get("timeseries_csv"),
            extreme_weather=data.get("extreme_weather"),
            graph=_build(GraphParams, data.get("graph", {})),
            encoder=_build(EncoderConfig, data.get("encoder", {})),
            actor_hidden=tuple(data.get("actor_hidden", (128, 128))),
            critic_hidden=tuple(data.get("critic_hidden", (128, 128))),
            reward_weights=_build(RewardWeights, data.get("reward_weights", {})),
            rule=_build(RuleSchedule, data.get("rule", {}),
                        tuple_fields=("charge_hours", "discharge_hours")),
            seeds=tuple(data.get("seeds", (0, 1, 2, 3, 4))),
            scenario_seed=data.get("scenario_seed", 0),
            out_dir=data.get("out_dir"),
            initial_soc=data.get("initial_soc", 0.5),
            initial_t_in=data.get("initial_t_in", "t_ref"),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config section {exc}") from None
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def save(cfg: RunConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load(path: str | Path) -> RunConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    return from_dict(data)
