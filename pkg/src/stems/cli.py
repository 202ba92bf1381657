"""Command-line entry points: gen-data, train, eval, shield-audit, export.

Every command is deterministic given (config, seed): randomness flows from
explicit seeds only, and log files never contain wall-clock values (timing
lives in the aggregate report, which is not part of the determinism
contract).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import runconfig
from .bundle import make_bundle
from .checkpoint import load_checkpoint, save_checkpoint, validate_against
from .encoder import StateHistory, attention_weights
from .errors import CheckpointMismatch, ConfigError, EmptyLogs, HorizonExceeded, \
    Infeasible, InvalidSpec, LengthMismatch, ParseError, SchemaError, ShapeError
from .evaluation import RuleBasedController, TrainedController, run_episode
from .exports import write_attention_csv, write_graph_csv
from .graph import build_graph, node_features_all
from .metrics import RATIO_FIELDS, episode_metrics, normalize
from .runconfig import RunConfig
from .scenarios import apply_extreme_weather, generate_scenario, load_timeseries_csv, \
    write_timeseries_csv
from .shield import shield_all
from .simulation import Action, BuildingState, Environment
from .training import LOG_COLUMNS, TrainConfig, train

USAGE_ERROR = 2
RUNTIME_ERROR = 1

METRIC_FIELDS = RATIO_FIELDS + ("discomfort_proportion", "safety_violation_rate")


def build_series(cfg: RunConfig, extreme_override: str | None = None):
    if cfg.timeseries_csv is not None:
        dt = cfg.scenario.dt if cfg.scenario is not None else 1.0
        series = load_timeseries_csv(cfg.timeseries_csv, dt=dt)
    else:
        series = generate_scenario(cfg.scenario, cfg.scenario_seed)
    kind = extreme_override if extreme_override is not None else cfg.extreme_weather
    if kind is not None:
        series = apply_extreme_weather(series, kind)
    return series


def make_environment(cfg: RunConfig, series) -> Environment:
    return Environment(cfg.buildings, series, initial_soc=cfg.initial_soc,
                       initial_t_in=cfg.initial_t_in)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# --- gen-data -----------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig, out_path: Path) -> int:
    if cfg.scenario is None:
        raise ConfigError("gen-data needs a scenario section in the config")
    series = build_series(cfg)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_timeseries_csv(series, out_path)
    print(f"wrote {series.horizon} steps x {series.n_buildings} buildings to {out_path}")
    return 0


# --- train ----------------------------------------------------------------------

def _log_path(out_dir: Path, seed: int) -> Path:
    return out_dir / f"train_log_seed{seed}.csv"


def _ckpt_path(out_dir: Path, seed: int) -> Path:
    return out_dir / f"checkpoint_seed{seed}.npz"


def _write_train_log(path: Path, rows: list[dict]) -> None:
    _write_rows(path, LOG_COLUMNS, [[repr(r[c]) if isinstance(r[c], float) else r[c]
                                     for c in LOG_COLUMNS] for r in rows])


def _read_train_log(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            row = {c: raw[c] for c in LOG_COLUMNS}
            row["episode"] = int(row["episode"])
            row["violations"] = int(row["violations"])
            for c in LOG_COLUMNS[1:-1]:
                row[c] = float(row[c])
            rows.append(row)
        return rows


def cmd_train(cfg: RunConfig, resume: bool = False) -> int:
    out_dir = cfg.resolve_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    series = build_series(cfg)
    graph = build_graph(cfg.buildings, cfg.graph)
    aggregate_rows = []

    for seed in cfg.seeds:
        train_cfg = TrainConfig(**{**cfg.train.__dict__, "seed": seed})
        env = make_environment(cfg, series)
        start_episode = 0
        prior_rows: list[dict] = []
        rng = np.random.default_rng(seed)
        latest = out_dir / f"checkpoint_seed{seed}_latest.npz"
        if resume and latest.exists():
            bundle, meta = load_checkpoint(latest)
            validate_against(bundle, env.n_buildings, cfg.encoder)
            start_episode = int(meta["episode"])
            rng.bit_generator.state = json.loads(meta["rng_state"])
            log_path = _log_path(out_dir, seed)
            if log_path.exists():
                prior_rows = [r for r in _read_train_log(log_path)
                              if r["episode"] < start_episode]
            print(f"seed {seed}: resuming at episode {start_episode}")
        else:
            bundle = make_bundle(env.configs, series, cfg.encoder, seed,
                                 actor_hidden=cfg.actor_hidden,
                                 critic_hidden=cfg.critic_hidden)

        def _snapshot(episode, bundle, rng, row, *, _seed=seed, _latest=latest):
            interval = train_cfg.checkpoint_interval
            if interval > 0 and (episode + 1) % interval == 0:
                save_checkpoint(_latest, bundle, meta={
                    "episode": episode + 1,
                    "rng_state": json.dumps(rng.bit_generator.state),
                    "seed": _seed,
                })

        result = train(env, graph, bundle, cfg.safety, cfg.reward_weights,
                       train_cfg, start_episode=start_episode, rng=rng,
                       on_episode_end=_snapshot)
        rows = prior_rows + result.logs
        _write_train_log(_log_path(out_dir, seed), rows)
        save_checkpoint(_ckpt_path(out_dir, seed), result.bundle,
                        meta={"episode": train_cfg.episodes, "seed": seed})
        tail = rows[-10:] if rows else []
        aggregate_rows.append({
            "seed": seed,
            "episodes": len(rows),
            "final_mean_return": float(np.mean([r["mean_return"] for r in tail])) if tail else 0.0,
            "final_cost": tail[-1]["cost"] if tail else 0.0,
            "total_violations": int(sum(r["violations"] for r in rows)),
            "wall_time_s": round(result.wall_time_s, 3),
        })
        print(f"seed {seed}: {len(rows)} episodes, "
              f"final return {aggregate_rows[-1]['final_mean_return']:.3f}, "
              f"{result.wall_time_s:.1f}s")

    header = list(aggregate_rows[0].keys())
    numeric = [c for c in header if c != "seed"]
    mean_row = {"seed": "mean", **{c: float(np.mean([r[c] for r in aggregate_rows]))
                                   for c in numeric}}
    std_row = {"seed": "std", **{c: float(np.std([r[c] for r in aggregate_rows]))
                                 for c in numeric}}
    _write_rows(out_dir / "aggregate.csv", header,
                [[r[c] for c in header] for r in aggregate_rows + [mean_row, std_row]])
    return 0


# --- eval -----------------------------------------------------------------------

def _metrics_row(label: str, m) -> list:
    return [label] + [repr(float(getattr(m, f))) for f in METRIC_FIELDS]


def cmd_eval(cfg: RunConfig, checkpoint: str | None, baseline: str | None,
             scenario_override: str | None, out_path: Path | None) -> int:
    series = build_series(cfg, extreme_override=scenario_override)
    env = make_environment(cfg, series)

    base_env = make_environment(cfg, series)
    base_info = run_episode(base_env, RuleBasedController(cfg.rule), cfg.safety,
                            cfg.reward_weights, shielded=False)
    base_metrics = episode_metrics(base_info.record)

    if baseline is not None:
        if baseline != "rule_based":
            raise ConfigError(f"unknown baseline {baseline!r}")
        mine = base_metrics
        label = "rule_based"
    else:
        if checkpoint is None:
            raise ConfigError("eval needs --checkpoint or --baseline rule_based")
        bundle, _ = load_checkpoint(checkpoint)
        validate_against(bundle, env.n_buildings, cfg.encoder)
        graph = build_graph(cfg.buildings, cfg.graph)
        info = run_episode(env, TrainedController(bundle, graph), cfg.safety,
                           cfg.reward_weights, shielded=True)
        mine = episode_metrics(info.record)
        label = "trained"

    normalized = normalize(mine, base_metrics)
    out_path = out_path or cfg.resolve_out_dir() / "eval_metrics.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(out_path, ["row"] + list(METRIC_FIELDS),
                [_metrics_row(f"{label}_raw", mine),
                 _metrics_row("baseline_raw", base_metrics),
                 _metrics_row(f"{label}_normalized", normalized)])
    print(f"{label} metrics (normalized to rule-based baseline):")
    for f in METRIC_FIELDS:
        print(f"  {f}: {getattr(normalized, f):.4f}")
    if normalized.absolute_flags:
        print(f"  [absolute values reported for: {', '.join(normalized.absolute_flags)}]")
    print(f"wrote {out_path}")
    return 0


# --- shield-audit -----------------------------------------------------------------

_AUDIT_IN = ("time", "building", "soc", "t_in", "prev_net", "p_batt", "p_hvac")
_AUDIT_OUT = _AUDIT_IN + ("kind", "distance",
                          "h_battery_before", "h_power_before", "h_grid_before",
                          "h_battery_after", "h_power_after", "h_grid_after")


def _read_audit_csv(path: str | Path) -> dict[int, dict[int, dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(list(_AUDIT_IN))
        missing = [c for c in _AUDIT_IN if c not in reader.fieldnames]
        if missing:
            raise SchemaError(missing)
        steps: dict[int, dict[int, dict]] = {}
        for r, raw in enumerate(reader):
            try:
                t = int(raw["time"])
                b = int(raw["building"])
                entry = {c: float(raw[c]) for c in _AUDIT_IN[2:]}
            except ValueError as exc:
                raise ParseError(str(exc), row=r) from None
            steps.setdefault(t, {})[b] = entry
        return steps


def cmd_shield_audit(cfg: RunConfig, actions_path: Path, out_path: Path) -> int:
    series = build_series(cfg)
    env = make_environment(cfg, series)
    configs = env.configs
    ids = [c.id for c in configs]
    steps = _read_audit_csv(actions_path)

    rows = []
    for t in sorted(steps):
        per_building = steps[t]
        missing = [b for b in ids if b not in per_building]
        if missing:
            raise LengthMismatch(f"step {t}: missing buildings {missing}")
        exo = series.at(t)
        states = [BuildingState(soc=per_building[b]["soc"], t_in=per_building[b]["t_in"],
                                prev_net=per_building[b]["prev_net"]) for b in ids]
        actions = [Action(p_batt=per_building[b]["p_batt"],
                          p_hvac=per_building[b]["p_hvac"]) for b in ids]
        results = shield_all(states, actions, configs, cfg.safety, exo, env.dt)
        for b, state, res in zip(ids, states, results):
            rows.append([t, b, repr(state.soc), repr(state.t_in), repr(state.prev_net),
                         repr(res.safe_action.p_batt), repr(res.safe_action.p_hvac),
                         res.kind, repr(res.distance),
                         repr(res.evals_before.h_battery), repr(res.evals_before.h_power),
                         repr(res.evals_before.h_grid),
                         repr(res.evals_after.h_battery), repr(res.evals_after.h_power),
                         repr(res.evals_after.h_grid)])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(out_path, _AUDIT_OUT, rows)
    kinds = [row[7] for row in rows]
    print(f"audited {len(rows)} actions: {kinds.count('passed')} passed, "
          f"{kinds.count('projected')} projected, {kinds.count('emergency')} emergency")
    print(f"wrote {out_path}")
    return 0


# --- export ---------------------------------------------------------------------

def cmd_export(cfg: RunConfig, what: str, checkpoint: str | None,
               out_path: Path | None) -> int:
    out_dir = cfg.resolve_out_dir()
    if what == "graph":
        graph = build_graph(cfg.buildings, cfg.graph)
        out_path = out_path or out_dir / "graph_weights.csv"
        out_path.parent.mkdir(parents=True, exist_ok=True)
        write_graph_csv(graph, [b.id for b in cfg.buildings], out_path)
        print(f"wrote {graph.n}x{graph.n} weight matrix to {out_path}")
        return 0
    if what == "attention":
        if checkpoint is None:
            raise ConfigError("export --what attention needs --checkpoint")
        bundle, _ = load_checkpoint(checkpoint)
        series = build_series(cfg)
        env = make_environment(cfg, series)
        validate_against(bundle, env.n_buildings, cfg.encoder)
        controller = RuleBasedController(cfg.rule)
        states = env.reset()
        histories = [StateHistory(bundle.encoder.window) for _ in env.configs]
        warmup = min(bundle.encoder.window + 1, env.horizon)
        for _ in range(warmup):
            exo = env.exo_now()
            feats = node_features_all(states, exo, env.configs, bundle.stats)
            for i, h in enumerate(histories):
                h.push(feats[i])
            outcomes = env.step(controller(env, states))
            states = [o.next_state for o in outcomes]
        weights = attention_weights(histories, bundle.encoder)
        out_path = out_path or out_dir / "attention_weights.csv"
        out_path.parent.mkdir(parents=True, exist_ok=True)
        write_attention_csv(weights, [b.id for b in cfg.buildings], out_path)
        print(f"wrote attention weights {weights.shape} to {out_path}")
        return 0
    raise ConfigError(f"unknown export target {what!r}")


# --- argument parsing --------------------------------------------------------------

def _add_config_arg(parser):
    parser.add_argument("--config", required=True, help="path to the JSON run config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stems",
                                     description="multi-building energy management lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize a scenario time-series CSV")
    _add_config_arg(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train per config seeds, write logs and checkpoints")
    _add_config_arg(p)
    p.add_argument("--resume", action="store_true",
                   help="continue from the latest periodic checkpoint")

    p = sub.add_parser("eval", help="evaluate a checkpoint or the rule-based baseline")
    _add_config_arg(p)
    p.add_argument("--checkpoint")
    p.add_argument("--baseline", choices=["rule_based"])
    p.add_argument("--scenario", choices=["heat_wave", "cold_wave"],
                   help="apply an extreme-weather perturbation before evaluating")
    p.add_argument("--out")

    p = sub.add_parser("shield-audit", help="replay a states+actions CSV through the shield")
    _add_config_arg(p)
    p.add_argument("--actions", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("export", help="export graph weights or attention patterns")
    _add_config_arg(p)
    p.add_argument("--what", required=True, choices=["graph", "attention"])
    p.add_argument("--checkpoint")
    p.add_argument("--out")

    p = sub.add_parser("export-graph", help="shorthand for export --what graph")
    _add_config_arg(p)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = runconfig.load(args.config)
        if args.command == "gen-data":
            return cmd_gen_data(cfg, Path(args.out))
        if args.command == "train":
            return cmd_train(cfg, resume=args.resume)
        if args.command == "eval":
            out = Path(args.out) if args.out else None
            return cmd_eval(cfg, args.checkpoint, args.baseline, args.scenario, out)
        if args.command == "shield-audit":
            return cmd_shield_audit(cfg, Path(args.actions), Path(args.out))
        if args.command == "export":
            out = Path(args.out) if args.out else None
            return cmd_export(cfg, args.what, args.checkpoint, out)
        if args.command == "export-graph":
            out = Path(args.out) if args.out else None
            return cmd_export(cfg, "graph", None, out)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, InvalidSpec, SchemaError, ParseError, LengthMismatch,
            CheckpointMismatch, ShapeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (HorizonExceeded, Infeasible, EmptyLogs, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
