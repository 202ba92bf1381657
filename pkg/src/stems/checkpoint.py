"""Versioned parameter checkpoints: named float64 tensors in an .npz archive,
bit-exact across a save/load round trip."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .agents import MLP, ActorParams, CriticParams
from .bundle import Bundle
from .encoder import EncoderConfig, EncoderParams
from .errors import CheckpointMismatch
from .graph import FeatureStats

FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, bundle: Bundle, meta: dict | None = None) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, tensor in bundle.encoder.tensors().items():
        arrays[f"encoder/{name}"] = tensor
    for i, actor in enumerate(bundle.actors):
        for name, tensor in actor.tensors().items():
            arrays[f"actor{i}/{name}"] = tensor
        arrays[f"actor{i}/box_center"] = actor.box_center
        arrays[f"actor{i}/box_half"] = actor.box_half
    for i, critic in enumerate(bundle.critics):
        for name, tensor in critic.tensors().items():
            arrays[f"critic{i}/{name}"] = tensor
    arrays["stats/mean"] = bundle.stats.mean
    arrays["stats/std"] = bundle.stats.std

    header = {
        "format_version": FORMAT_VERSION,
        "n_buildings": len(bundle.actors),
        "encoder_cfg": {
            "hidden": bundle.encoder_cfg.hidden,
            "layers": bundle.encoder_cfg.layers,
            "heads": bundle.encoder_cfg.heads,
            "head_dim": bundle.encoder_cfg.head_dim,
            "attn_dim": bundle.encoder_cfg.attn_dim,
            "repr_dim": bundle.encoder_cfg.repr_dim,
            "window": bundle.encoder_cfg.window,
            "activation": bundle.encoder_cfg.activation,
        },
        "meta": meta or {},
    }
    arrays["header"] = np.array(json.dumps(header, sort_keys=True))
    np.savez(path, **arrays)


def _collect_mlp(data, prefix: str) -> MLP:
    weights, biases = [], []
    l = 0
    while f"{prefix}net.w{l}" in data:
        weights.append(data[f"{prefix}net.w{l}"])
        biases.append(data[f"{prefix}net.b{l}"])
        l += 1
    if not weights:
        raise CheckpointMismatch(f"no tensors found under {prefix!r}")
    return MLP(weights=weights, biases=biases)


def load_checkpoint(path: str | Path) -> tuple[Bundle, dict]:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointMismatch(
                f"unsupported checkpoint version {header.get('format_version')}")
        cfg = EncoderConfig(**header["encoder_cfg"])
        n = header["n_buildings"]

        gcn = []
        for l in range(cfg.layers):
            key = f"encoder/gcn_w{l}"
            if key not in data:
                raise CheckpointMismatch(f"missing tensor {key}")
            gcn.append(data[key])
        encoder = EncoderParams(
            gcn_weights=gcn,
            attn_query=data["encoder/attn_query"],
            attn_key=data["encoder/attn_key"],
            attn_value=data["encoder/attn_value"],
            attn_out=data["encoder/attn_out"],
            fuse_spatial=data["encoder/fuse_spatial"],
            fuse_temporal=data["encoder/fuse_temporal"],
            fuse_bias=data["encoder/fuse_bias"],
            window=cfg.window,
            activation=cfg.activation,
        )
        actors = [ActorParams(net=_collect_mlp(data, f"actor{i}/"),
                              log_std=data[f"actor{i}/log_std"],
                              box_center=data[f"actor{i}/box_center"],
                              box_half=data[f"actor{i}/box_half"])
                  for i in range(n)]
        critics = [CriticParams(net=_collect_mlp(data, f"critic{i}/"))
                   for i in range(n)]
        stats = FeatureStats(mean=data["stats/mean"], std=data["stats/std"])

    bundle = Bundle(encoder=encoder, actors=actors, critics=critics, stats=stats,
                    encoder_cfg=cfg)
    _check_shapes(bundle, cfg)
    return bundle, header["meta"]


def _check_shapes(bundle: Bundle, cfg: EncoderConfig) -> None:
    enc = bundle.encoder
    if enc.fuse_bias.shape != (cfg.repr_dim,):
        raise CheckpointMismatch(
            f"repr dim {enc.fuse_bias.shape} != configured {cfg.repr_dim}")
    if enc.attn_query.shape[:2] != (cfg.heads, cfg.head_dim):
        raise CheckpointMismatch("attention head shapes differ from configuration")
    for actor in bundle.actors:
        if actor.net.weights[0].shape[1] != cfg.repr_dim:
            raise CheckpointMismatch("actor input dim differs from encoder repr dim")
    for critic in bundle.critics:
        if critic.net.weights[0].shape[1] != cfg.repr_dim:
            raise CheckpointMismatch("critic input dim differs from encoder repr dim")


def validate_against(bundle: Bundle, n_buildings: int, cfg: EncoderConfig) -> None:
    """Raise CheckpointMismatch when a loaded bundle cannot serve a config."""
    if len(bundle.actors) != n_buildings:
        raise CheckpointMismatch(
            f"checkpoint holds {len(bundle.actors)} actors, config has {n_buildings}")
    mine = bundle.encoder_cfg
    if mine != cfg:
        raise CheckpointMismatch(f"encoder configuration differs: {mine} vs {cfg}")
