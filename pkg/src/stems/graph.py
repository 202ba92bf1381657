"""Inter-building communication graph and node-feature assembly.

Edge weights combine a geographic Gaussian kernel with an attribute-similarity
kernel; aggregation is symmetric degree-normalized with an explicit self term.
The topology is static: weights are computed once from the building configs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .simulation import BuildingConfig, BuildingState, ExoSnapshot, ExogenousSeries, \
    Action, step_buildings

FEATURE_DIM = 12  # [soc, t_in, prev_net] + [t_out, solar, price] + type one-hot + 3 attrs


@dataclass(frozen=True)
class GraphParams:
    """Kernel weights and scales; sigmas left None are derived at build time
    as the median pairwise distance of the corresponding quantity."""

    alpha: float = 0.5
    beta: float = 0.5
    sigma_d: float | None = None     # km
    sigma_f: float | None = None     # attribute-space distance
    edge_threshold: float = 0.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ConfigError("need alpha, beta >= 0 with alpha + beta > 0")
        for name in ("sigma_d", "sigma_f"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ConfigError(f"{name} must be > 0 when given")
        if self.edge_threshold < 0:
            raise ConfigError("edge_threshold must be >= 0")


@dataclass
class BuildingGraph:
    """Static weighted topology shared by all graph-convolution layers."""

    n: int
    weights: np.ndarray              # (N, N) symmetric, w_ii = self weight
    neighbor_sets: tuple[tuple[int, ...], ...]
    degrees: np.ndarray              # (N,)
    norm_adjacency: np.ndarray       # (N, N), w_ij / sqrt(d_i d_j) on N_i u {i}
    params: GraphParams


def edge_weight(loc_i: tuple[float, float], loc_j: tuple[float, float],
                f_i: np.ndarray, f_j: np.ndarray, params: GraphParams) -> float:
    """Connection strength from geographic and attribute proximity."""
    if params.sigma_d is None or params.sigma_f is None:
        raise ConfigError("edge_weight needs concrete sigmas; call resolve_params first")
    d2 = (loc_i[0] - loc_j[0]) ** 2 + (loc_i[1] - loc_j[1]) ** 2
    f2 = float(np.sum((np.asarray(f_i, dtype=float) - np.asarray(f_j, dtype=float)) ** 2))
    return (params.alpha * np.exp(-d2 / (2.0 * params.sigma_d ** 2))
            + params.beta * np.exp(-f2 / (2.0 * params.sigma_f ** 2)))


def resolve_params(configs: list[BuildingConfig], params: GraphParams) -> GraphParams:
    """Fill derived sigmas from median pairwise distances (scale-free defaults)."""
    if params.sigma_d is not None and params.sigma_f is not None:
        return params
    locs = np.array([c.location for c in configs], dtype=float)
    feats = np.array([c.attributes() for c in configs], dtype=float)
    dists, fdists = [], []
    for i in range(len(configs)):
        for j in range(i + 1, len(configs)):
            dists.append(float(np.linalg.norm(locs[i] - locs[j])))
            fdists.append(float(np.linalg.norm(feats[i] - feats[j])))

    def _median_or_one(values: list[float]) -> float:
        if not values:
            return 1.0
        med = float(np.median(values))
        return med if med > 1e-12 else 1.0

    sigma_d = params.sigma_d if params.sigma_d is not None else _median_or_one(dists)
    sigma_f = params.sigma_f if params.sigma_f is not None else _median_or_one(fdists)
    return replace(params, sigma_d=sigma_d, sigma_f=sigma_f)


def build_graph(configs: list[BuildingConfig], params: GraphParams) -> BuildingGraph:
    """Compute pairwise weights, neighbor sets, degrees and the normalized
    adjacency.

    The self weight (needed because aggregation sums over N_i and the node
    itself, while the kernel is defined for pairs) is the node's maximum
    retained incident weight, or alpha + beta for isolated nodes, which keeps
    degrees strictly positive.
    """
    if not configs:
        raise ConfigError("cannot build a graph over zero buildings")
    params = resolve_params(configs, params)
    n = len(configs)
    weights = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            w = edge_weight(configs[i].location, configs[j].location,
                            configs[i].attributes(), configs[j].attributes(), params)
            weights[i, j] = weights[j, i] = w

    cap = params.alpha + params.beta
    neighbor_sets = []
    for i in range(n):
        neigh = tuple(j for j in range(n) if j != i and weights[i, j] > params.edge_threshold)
        neighbor_sets.append(neigh)
        if neigh:
            weights[i, i] = min(max(weights[i, j] for j in neigh), cap)
        else:
            weights[i, i] = cap

    degrees = np.empty(n)
    mask = np.zeros((n, n), dtype=bool)
    for i, neigh in enumerate(neighbor_sets):
        mask[i, i] = True
        for j in neigh:
            mask[i, j] = True
        degrees[i] = weights[i, i] + sum(weights[i, j] for j in neigh)

    norm = np.zeros((n, n))
    inv_sqrt_d = 1.0 / np.sqrt(degrees)
    norm[mask] = (weights * np.outer(inv_sqrt_d, inv_sqrt_d))[mask]
    return BuildingGraph(n=n, weights=weights, neighbor_sets=tuple(neighbor_sets),
                         degrees=degrees, norm_adjacency=norm, params=params)


@dataclass(frozen=True)
class FeatureStats:
    """Per-dimension z-score statistics from a calibration rollout."""

    mean: np.ndarray
    std: np.ndarray

    def scale(self, raw: np.ndarray) -> np.ndarray:
        # Constant features (std ~ 0) pass through with divisor 1.
        denom = np.where(self.std > 1e-12, self.std, 1.0)
        return (raw - self.mean) / denom


def raw_node_features(state: BuildingState, exo: ExoSnapshot, config: BuildingConfig,
                      index: int) -> np.ndarray:
    """Concatenated state / environment / characteristics vector for one node."""
    own = np.array([state.soc, state.t_in, state.prev_net])
    env = np.array([exo.t_out, float(exo.solar[index]), exo.price])
    return np.concatenate([own, env, config.attributes()])


def node_features(state: BuildingState, exo: ExoSnapshot, config: BuildingConfig,
                  index: int, stats: FeatureStats) -> np.ndarray:
    return stats.scale(raw_node_features(state, exo, config, index))


def node_features_all(states: list[BuildingState], exo: ExoSnapshot,
                      configs: list[BuildingConfig], stats: FeatureStats) -> np.ndarray:
    rows = [raw_node_features(s, exo, c, i) for i, (s, c) in enumerate(zip(states, configs))]
    return stats.scale(np.stack(rows))


def calibrate_stats(configs: list[BuildingConfig], series: ExogenousSeries,
                    steps: int = 168, initial_soc: float = 0.5) -> FeatureStats:
    """Collect feature statistics from a zero-action rollout.

    Deterministic, so the statistics are identical across seeds and runs for
    the same configs and series.
    """
    steps = min(steps, series.horizon)
    states = [BuildingState(soc=min(max(initial_soc, c.soc_min), c.soc_max),
                            t_in=c.t_ref, prev_net=0.0) for c in configs]
    zero = [Action(0.0, 0.0)] * len(configs)
    samples = []
    for t in range(steps):
        exo = series.at(t)
        samples.append(np.stack([raw_node_features(s, exo, c, i)
                                 for i, (s, c) in enumerate(zip(states, configs))]))
        outcomes = step_buildings(states, zero, exo, configs, series.dt)
        states = [o.next_state for o in outcomes]
    stacked = np.concatenate(samples, axis=0)
    return FeatureStats(mean=stacked.mean(axis=0), std=stacked.std(axis=0))
