"""Spatial-temporal encoder: stacked graph convolutions over the building
graph, multi-head dot-product attention over a sliding window of node
features, and a linear fusion head.

The architecture is static, so gradients are computed by a fixed-topology
manual reverse pass over cached activations instead of a general autodiff
tape. Scores are plain dot products (no 1/sqrt(d) scaling) and there is no
dropout or normalization layer.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, StaleCache
from .graph import BuildingGraph

ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0.0).astype(float)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "linear": (lambda z: z, lambda z: np.ones_like(z)),
}


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture hyperparameters (weights live in EncoderParams)."""

    hidden: int = 64
    layers: int = 3
    heads: int = 4
    head_dim: int = 32
    attn_dim: int = 64
    repr_dim: int = 64
    window: int = 24          # attention looks at the last window+1 steps
    activation: str = "relu"

    def __post_init__(self):
        for name in ("hidden", "layers", "heads", "head_dim", "attn_dim", "repr_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.window < 0:
            raise ConfigError("window must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = shape[-1], shape[-2] if len(shape) > 1 else shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class EncoderParams:
    """All learnable tensors of the encoder."""

    gcn_weights: list[np.ndarray]    # layer l: (d_out, d_in)
    attn_query: np.ndarray           # (heads, head_dim, feature_dim)
    attn_key: np.ndarray
    attn_value: np.ndarray
    attn_out: np.ndarray             # (attn_dim, heads * head_dim)
    fuse_spatial: np.ndarray         # (repr_dim, hidden)
    fuse_temporal: np.ndarray        # (repr_dim, attn_dim)
    fuse_bias: np.ndarray            # (repr_dim,)
    window: int = 24
    activation: str = "relu"

    @classmethod
    def init(cls, feature_dim: int, cfg: EncoderConfig, seed: int) -> "EncoderParams":
        rng = np.random.default_rng(seed)
        dims = [feature_dim] + [cfg.hidden] * cfg.layers
        gcn = [glorot_uniform(rng, (dims[l + 1], dims[l])) for l in range(cfg.layers)]
        return cls(
            gcn_weights=gcn,
            attn_query=glorot_uniform(rng, (cfg.heads, cfg.head_dim, feature_dim)),
            attn_key=glorot_uniform(rng, (cfg.heads, cfg.head_dim, feature_dim)),
            attn_value=glorot_uniform(rng, (cfg.heads, cfg.head_dim, feature_dim)),
            attn_out=glorot_uniform(rng, (cfg.attn_dim, cfg.heads * cfg.head_dim)),
            fuse_spatial=glorot_uniform(rng, (cfg.repr_dim, cfg.hidden)),
            fuse_temporal=glorot_uniform(rng, (cfg.repr_dim, cfg.attn_dim)),
            fuse_bias=np.zeros(cfg.repr_dim),
            window=cfg.window,
            activation=cfg.activation,
        )

    @property
    def feature_dim(self) -> int:
        return self.gcn_weights[0].shape[1]

    @property
    def repr_dim(self) -> int:
        return self.fuse_bias.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        named = {f"gcn_w{l}": w for l, w in enumerate(self.gcn_weights)}
        named.update(attn_query=self.attn_query, attn_key=self.attn_key,
                     attn_value=self.attn_value, attn_out=self.attn_out,
                     fuse_spatial=self.fuse_spatial, fuse_temporal=self.fuse_temporal,
                     fuse_bias=self.fuse_bias)
        return named


@dataclass
class EncoderGrads:
    """Gradient buffers mirroring every EncoderParams tensor."""

    gcn_weights: list[np.ndarray]
    attn_query: np.ndarray
    attn_key: np.ndarray
    attn_value: np.ndarray
    attn_out: np.ndarray
    fuse_spatial: np.ndarray
    fuse_temporal: np.ndarray
    fuse_bias: np.ndarray

    @classmethod
    def zeros_like(cls, params: EncoderParams) -> "EncoderGrads":
        return cls(
            gcn_weights=[np.zeros_like(w) for w in params.gcn_weights],
            attn_query=np.zeros_like(params.attn_query),
            attn_key=np.zeros_like(params.attn_key),
            attn_value=np.zeros_like(params.attn_value),
            attn_out=np.zeros_like(params.attn_out),
            fuse_spatial=np.zeros_like(params.fuse_spatial),
            fuse_temporal=np.zeros_like(params.fuse_temporal),
            fuse_bias=np.zeros_like(params.fuse_bias),
        )

    def tensors(self) -> dict[str, np.ndarray]:
        named = {f"gcn_w{l}": w for l, w in enumerate(self.gcn_weights)}
        named.update(attn_query=self.attn_query, attn_key=self.attn_key,
                     attn_value=self.attn_value, attn_out=self.attn_out,
                     fuse_spatial=self.fuse_spatial, fuse_temporal=self.fuse_temporal,
                     fuse_bias=self.fuse_bias)
        return named

    def add_(self, other: "EncoderGrads") -> "EncoderGrads":
        for mine, theirs in zip(self.tensors().values(), other.tensors().values()):
            mine += theirs
        return self


class StateHistory:
    """Ring buffer of the last window+1 node-feature vectors for one building.

    Until the buffer is full, the earliest pushed vector is repeated at the
    front so the window arithmetic stays uniform during warm-up.
    """

    def __init__(self, window: int):
        if window < 0:
            raise ConfigError("window must be >= 0")
        self.window = window
        self._buf: deque[np.ndarray] = deque(maxlen=window + 1)

    def push(self, vec: np.ndarray) -> None:
        self._buf.append(np.asarray(vec, dtype=float))

    def __len__(self) -> int:
        return len(self._buf)

    def as_array(self) -> np.ndarray:
        if not self._buf:
            raise ValueError("history is empty; push at least one observation")
        pad = [self._buf[0]] * (self.window + 1 - len(self._buf))
        return np.stack(pad + list(self._buf))


def stack_histories(histories) -> np.ndarray:
    """Normalize a list of StateHistory (or an (N, W, D) array) to an array."""
    if isinstance(histories, np.ndarray):
        if histories.ndim != 3:
            raise ShapeError(f"expected (N, window+1, D) array, got {histories.shape}")
        return histories.astype(float)
    return np.stack([h.as_array() for h in histories])


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def gcn_layer(h: np.ndarray, graph: BuildingGraph, weight: np.ndarray,
              activation: str = "relu") -> np.ndarray:
    """One graph convolution: degree-normalized aggregation, linear map, nonlinearity."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != graph.n:
        raise ShapeError(f"features {h.shape} do not match graph with n={graph.n}")
    if weight.shape[1] != h.shape[1]:
        raise ShapeError(f"weight {weight.shape} incompatible with features {h.shape}")
    act, _ = ACTIVATIONS[activation]
    return act(graph.norm_adjacency @ h @ weight.T)


def _attention_forward(hist: np.ndarray, params: EncoderParams):
    """Batched multi-head attention over the window; returns output and cache."""
    x = hist[:, -1, :]                                           # queries from the current step
    q = np.einsum("hed,nd->nhe", params.attn_query, x)
    k = np.einsum("hed,nwd->nwhe", params.attn_key, hist)
    v = np.einsum("hed,nwd->nwhe", params.attn_value, hist)
    scores = np.einsum("nhe,nwhe->nhw", q, k)
    alpha = _softmax(scores)                                     # (N, heads, W)
    z_heads = np.einsum("nhw,nwhe->nhe", alpha, v)
    concat = z_heads.reshape(hist.shape[0], -1)
    z = concat @ params.attn_out.T
    return z, (x, q, k, v, alpha, concat)


def temporal_attention(history: StateHistory | np.ndarray,
                       params: EncoderParams) -> np.ndarray:
    """Attention-weighted temporal summary for a single building."""
    hist = history.as_array() if isinstance(history, StateHistory) else np.asarray(history, float)
    if hist.ndim != 2:
        raise ShapeError(f"expected (window+1, D) history, got {hist.shape}")
    z, _ = _attention_forward(hist[None, :, :], params)
    return z[0]


def attention_weights(histories, params: EncoderParams) -> np.ndarray:
    """Per-building, per-head attention distributions over the window, (N, heads, W)."""
    hist = stack_histories(histories)
    _, (_, _, _, _, alpha, _) = _attention_forward(hist, params)
    return alpha


def fuse(h: np.ndarray, z: np.ndarray, params: EncoderParams) -> np.ndarray:
    """Affine combination of spatial and temporal features."""
    h = np.asarray(h, dtype=float)
    z = np.asarray(z, dtype=float)
    if h.shape[-1] != params.fuse_spatial.shape[1]:
        raise ShapeError(f"spatial input dim {h.shape[-1]} != {params.fuse_spatial.shape[1]}")
    if z.shape[-1] != params.fuse_temporal.shape[1]:
        raise ShapeError(f"temporal input dim {z.shape[-1]} != {params.fuse_temporal.shape[1]}")
    return h @ params.fuse_spatial.T + z @ params.fuse_temporal.T + params.fuse_bias


def _fingerprint(params: EncoderParams) -> tuple[float, ...]:
    return tuple(float(np.sum(t)) for t in params.tensors().values())


@dataclass
class EncoderCache:
    """Activations captured by encode() for the manual reverse pass."""

    params: EncoderParams
    fingerprint: tuple[float, ...]
    hist: np.ndarray
    adjacency: np.ndarray
    gcn_inputs: list[np.ndarray]      # H_l before each layer
    gcn_aggregated: list[np.ndarray]  # S_l = A @ H_l
    gcn_pre: list[np.ndarray]         # Z_l = S_l @ W_l.T
    attn: tuple
    z: np.ndarray
    h_top: np.ndarray


def encode(graph: BuildingGraph, histories,
           params: EncoderParams) -> tuple[np.ndarray, EncoderCache]:
    """Full forward pass; returns per-building representations and a cache."""
    hist = stack_histories(histories)
    n, w, d = hist.shape
    if n != graph.n:
        raise ShapeError(f"{n} histories for a graph with n={graph.n}")
    if w != params.window + 1:
        raise ShapeError(f"history window {w} != encoder window {params.window + 1}")
    if d != params.feature_dim:
        raise ShapeError(f"feature dim {d} != encoder input dim {params.feature_dim}")

    act, _ = ACTIVATIONS[params.activation]
    a = graph.norm_adjacency
    h = hist[:, -1, :]
    gcn_inputs, gcn_aggregated, gcn_pre = [], [], []
    for weight in params.gcn_weights:
        gcn_inputs.append(h)
        s = a @ h
        z_pre = s @ weight.T
        gcn_aggregated.append(s)
        gcn_pre.append(z_pre)
        h = act(z_pre)
    h_top = h

    z, attn_cache = _attention_forward(hist, params)
    reps = fuse(h_top, z, params)
    cache = EncoderCache(params=params, fingerprint=_fingerprint(params), hist=hist,
                         adjacency=a, gcn_inputs=gcn_inputs, gcn_aggregated=gcn_aggregated,
                         gcn_pre=gcn_pre, attn=attn_cache, z=z, h_top=h_top)
    return reps, cache


def encoder_backward(upstream: np.ndarray, cache: EncoderCache) -> EncoderGrads:
    """Exact reverse-mode gradients of all encoder tensors.

    upstream is dLoss/dRepresentation, shape (N, repr_dim); the scalar loss
    itself never needs to be known here.
    """
    params = cache.params
    if _fingerprint(params) != cache.fingerprint:
        raise StaleCache("encoder parameters changed since the cached forward pass")
    g = np.asarray(upstream, dtype=float)
    if g.shape != (cache.hist.shape[0], params.repr_dim):
        raise ShapeError(f"upstream {g.shape} != (N, repr_dim)")

    grads = EncoderGrads.zeros_like(params)
    _, dact = ACTIVATIONS[params.activation]

    # fusion head
    grads.fuse_bias += g.sum(axis=0)
    grads.fuse_spatial += g.T @ cache.h_top
    grads.fuse_temporal += g.T @ cache.z
    d_h = g @ params.fuse_spatial
    d_z = g @ params.fuse_temporal

    # attention branch
    x, q, k, v, alpha, concat = cache.attn
    grads.attn_out += d_z.T @ concat
    d_concat = d_z @ params.attn_out
    d_zheads = d_concat.reshape(alpha.shape[0], alpha.shape[1], -1)
    d_alpha = np.einsum("nhe,nwhe->nhw", d_zheads, v)
    d_v = np.einsum("nhw,nhe->nwhe", alpha, d_zheads)
    inner = (alpha * d_alpha).sum(axis=-1, keepdims=True)
    d_scores = alpha * (d_alpha - inner)
    d_q = np.einsum("nhw,nwhe->nhe", d_scores, k)
    d_k = np.einsum("nhw,nhe->nwhe", d_scores, q)
    grads.attn_query += np.einsum("nhe,nd->hed", d_q, x)
    grads.attn_key += np.einsum("nwhe,nwd->hed", d_k, cache.hist)
    grads.attn_value += np.einsum("nwhe,nwd->hed", d_v, cache.hist)

    # graph-convolution stack
    for l in range(len(params.gcn_weights) - 1, -1, -1):
        d_pre = d_h * dact(cache.gcn_pre[l])
        grads.gcn_weights[l] += d_pre.T @ cache.gcn_aggregated[l]
        d_h = cache.adjacency.T @ (d_pre @ params.gcn_weights[l])
    return grads
