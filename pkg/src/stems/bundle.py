"""Assembly of the learnable components for one run."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import ActorParams, CriticParams
from .encoder import EncoderConfig, EncoderParams
from .graph import FEATURE_DIM, BuildingGraph, FeatureStats, GraphParams, \
    build_graph, calibrate_stats
from .simulation import BuildingConfig, ExogenousSeries


@dataclass
class Bundle:
    """Everything the trained policy needs beyond configs and scenario."""

    encoder: EncoderParams
    actors: list[ActorParams]
    critics: list[CriticParams]
    stats: FeatureStats
    encoder_cfg: EncoderConfig


def make_bundle(configs: list[BuildingConfig], series: ExogenousSeries,
                encoder_cfg: EncoderConfig, seed: int,
                actor_hidden: tuple[int, ...] = (128, 128),
                critic_hidden: tuple[int, ...] = (128, 128)) -> Bundle:
    """Initialize encoder/actor/critic parameters and calibration statistics.

    Sub-seeds are derived from one SeedSequence so every tensor is a pure
    function of (configs, series, encoder_cfg, seed).
    """
    children = np.random.SeedSequence(seed).spawn(1 + 2 * len(configs))
    seeds = [int(s.generate_state(1)[0]) for s in children]
    encoder = EncoderParams.init(FEATURE_DIM, encoder_cfg, seeds[0])
    actors = [ActorParams.init(encoder_cfg.repr_dim, c, seeds[1 + i], hidden=actor_hidden)
              for i, c in enumerate(configs)]
    critics = [CriticParams.init(encoder_cfg.repr_dim, seeds[1 + len(configs) + i],
                                 hidden=critic_hidden)
               for i in range(len(configs))]
    stats = calibrate_stats(configs, series)
    return Bundle(encoder=encoder, actors=actors, critics=critics, stats=stats,
                  encoder_cfg=encoder_cfg)


def make_graph(configs: list[BuildingConfig], params: GraphParams) -> BuildingGraph:
    return build_graph(configs, params)
