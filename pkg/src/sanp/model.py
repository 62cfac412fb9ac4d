"""Sparse attentive neural process network.

Encoder: each context pair ``(x_i, y_i)`` is embedded linearly,
``x'_i = W_l x_i`` and ``y'_i = W_e y_i``, passed through a two-layer ReLU
MLP to give ``r_i``, and the set ``R`` goes through multi-head
self-attention. Decoder: multi-head cross-attention with the embedded target
location as query, the embedded context locations as keys and the attended
latents as values, followed by a two-layer MLP that emits the predictive mean
and (through softplus plus a floor) the standard deviation.

Multi-head attention sums the per-head outputs after an output projection
and adds a bias vector; it does not concatenate heads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .raster import DemGrid, ElevationStats, WindowSpec
from .sampling import InsufficientContextError, SamplerConfig, context_for_point, pixel_context


class EmptyContextError(ValueError):
    """Attention was asked to attend over zero context points."""


@dataclass(frozen=True)
class ModelConfig:
    D: int = 512
    heads_enc: int = 2
    heads_dec: int = 2
    hidden: int = 1024
    sigma_floor: float = 1e-3

    def __post_init__(self):
        if self.D < 1 or self.hidden < 1:
            raise ValueError("D and hidden must be positive")
        for h in (self.heads_enc, self.heads_dec):
            if h < 1 or self.D % h:
                raise ValueError(f"D={self.D} must be divisible by head count {h}")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be positive")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape, dtype) -> np.ndarray:
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape).astype(dtype)


def _attention_params(prefix: str, D: int, heads: int, rng, dtype) -> Dict[str, np.ndarray]:
    dq = D // heads
    out = {}
    for k in range(heads):
        out[f"{prefix}.h{k}.W_q"] = _glorot(rng, D, dq, (D, dq), dtype)
        out[f"{prefix}.h{k}.W_k"] = _glorot(rng, D, dq, (D, dq), dtype)
        out[f"{prefix}.h{k}.W_v"] = _glorot(rng, D, dq, (D, dq), dtype)
        out[f"{prefix}.h{k}.W_o"] = _glorot(rng, dq, D, (dq, D), dtype)
    out[f"{prefix}.w_0"] = np.zeros(D, dtype=dtype)
    return out


def init_params(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> Dict[str, np.ndarray]:
    """Freshly initialised parameters (Glorot-uniform matrices, zero biases)."""
    rng = np.random.default_rng(seed)
    D, H = cfg.D, cfg.hidden
    p = {
        "enc.W_l": _glorot(rng, 2, D, (D, 2), dtype),
        "enc.W_e": _glorot(rng, 1, D, (D, 1), dtype),
        "enc.mlp.0.W": _glorot(rng, D, H, (D, H), dtype),
        "enc.mlp.0.b": np.zeros(H, dtype=dtype),
        "enc.mlp.1.W": _glorot(rng, H, D, (H, D), dtype),
        "enc.mlp.1.b": np.zeros(D, dtype=dtype),
    }
    p.update(_attention_params("sa", D, cfg.heads_enc, rng, dtype))
    p.update(_attention_params("ca", D, cfg.heads_dec, rng, dtype))
    p.update({
        "dec.mlp.0.W": _glorot(rng, D, H, (D, H), dtype),
        "dec.mlp.0.b": np.zeros(H, dtype=dtype),
        "dec.mlp.1.W": _glorot(rng, H, 2, (H, 2), dtype),
        "dec.mlp.1.b": np.zeros(2, dtype=dtype),
    })
    return p


def config_from_params(params: Mapping[str, np.ndarray], sigma_floor: float = 1e-3) -> ModelConfig:
    """Recover the architecture from parameter shapes."""
    D = params["enc.W_l"].shape[0]
    hidden = params["enc.mlp.0.W"].shape[1]
    he = sum(1 for k in params if k.startswith("sa.") and k.endswith(".W_q"))
    hd = sum(1 for k in params if k.startswith("ca.") and k.endswith(".W_q"))
    return ModelConfig(D=D, heads_enc=he, heads_dec=hd, hidden=hidden, sigma_floor=sigma_floor)


def as_tensors(params: Mapping[str, np.ndarray], requires_grad: bool = False) -> Dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=requires_grad, name=k) for k, v in params.items()}


# ---------------------------------------------------------------- attention


def sdp(Q: Tensor, K: Tensor, V: Tensor) -> Tensor:
    """``softmax(Q K^T / sqrt(d)) V`` with ``d`` the key width."""
    if K.shape[-2] == 0:
        raise EmptyContextError("attention over an empty context")
    d = Q.shape[-1]
    scores = ad.scale(ad.matmul(Q, ad.transpose(K)), 1.0 / math.sqrt(d))
    return ad.matmul(ad.softmax_rows(scores), V)


def multi_head(Q: Tensor, K: Tensor, V: Tensor, params: Mapping[str, Tensor], prefix: str,
               heads: int) -> Tensor:
    """``w_0 + sum_k sdp(Q Wq_k, K Wk_k, V Wv_k) Wo_k``."""
    if K.shape[-2] == 0:
        raise EmptyContextError("attention over an empty context")
    out = None
    for k in range(heads):
        h = f"{prefix}.h{k}"
        a = sdp(ad.matmul(Q, params[f"{h}.W_q"]), ad.matmul(K, params[f"{h}.W_k"]),
                ad.matmul(V, params[f"{h}.W_v"]))
        o = ad.matmul(a, params[f"{h}.W_o"])
        out = o if out is None else ad.add(out, o)
    return ad.add_bias(out, params[f"{prefix}.w_0"])


def _mlp(x: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    h = ad.relu(ad.affine(x, params[f"{prefix}.0.W"], params[f"{prefix}.0.b"]))
    return ad.affine(h, params[f"{prefix}.1.W"], params[f"{prefix}.1.b"])


def embed_locations(x: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    return ad.matmul(x, ad.transpose(params["enc.W_l"]))


def encode(ctx_coords: Tensor, ctx_values: Tensor, params: Mapping[str, Tensor],
           cfg: ModelConfig) -> Tuple[Tensor, Tensor]:
    """Latents of a context set.

    Args:
        ctx_coords: ``(..., K, 2)`` relative coordinates.
        ctx_values: ``(..., K, 1)`` standardised elevations.

    Returns:
        ``(R_attn, X')``: attended latents and embedded locations, both
        ``(..., K, D)``.
    """
    if ctx_coords.shape[-2] == 0:
        raise EmptyContextError("cannot encode an empty context")
    xe = embed_locations(ctx_coords, params)
    ye = ad.matmul(ctx_values, ad.transpose(params["enc.W_e"]))
    r = _mlp(ad.add(xe, ye), params, "enc.mlp")
    r_attn = multi_head(r, r, r, params, "sa", cfg.heads_enc)
    return r_attn, xe


def decode(r_attn: Tensor, x_embed: Tensor, target_coords: Tensor, params: Mapping[str, Tensor],
           cfg: ModelConfig) -> Tuple[Tensor, Tensor]:
    """Predictive mean and standard deviation (standardised units) at the targets.

    Args:
        target_coords: ``(..., M, 2)`` relative target coordinates.

    Returns:
        ``(mu, sigma)``, each ``(..., M)``.
    """
    q = embed_locations(target_coords, params)
    r_star = multi_head(q, x_embed, r_attn, params, "ca", cfg.heads_dec)
    out = _mlp(r_star, params, "dec.mlp")
    mu = ad.column(out, 0)
    sigma = ad.add_scalar(ad.softplus(ad.column(out, 1)), cfg.sigma_floor)
    return mu, sigma


def forward(params: Mapping[str, Tensor], cfg: ModelConfig, ctx_coords, ctx_values,
            target_coords=None) -> Tuple[Tensor, Tensor]:
    """Full pass for a batch; targets default to the origin of each context frame.

    Returns ``(mu, sigma)`` of shape ``(B, M)``.
    """
    cc = ctx_coords if isinstance(ctx_coords, Tensor) else Tensor(ctx_coords)
    cv = ctx_values if isinstance(ctx_values, Tensor) else Tensor(ctx_values)
    if target_coords is None:
        target_coords = np.zeros(cc.shape[:-2] + (1, 2), dtype=cc.dtype)
    tc = target_coords if isinstance(target_coords, Tensor) else Tensor(target_coords)
    r_attn, xe = encode(cc, cv, params, cfg)
    return decode(r_attn, xe, tc, params, cfg)


# ---------------------------------------------------------------- prediction


@dataclass(frozen=True, eq=False)
class Prediction:
    """Per-target Gaussians in metres; ``ok`` is False for unpredictable targets."""

    mu: np.ndarray
    sigma: np.ndarray
    ok: np.ndarray


def _run_groups(params, cfg, contexts, dtype, chunk: int):
    """Evaluate contexts grouped by size; returns standardised mu, sigma lists."""
    n = len(contexts)
    mu = np.zeros(n)
    sigma = np.zeros(n)
    sizes = {}
    for i, c in enumerate(contexts):
        if c is not None:
            sizes.setdefault(len(c[1]), []).append(i)
    for k, idx in sorted(sizes.items()):
        for s in range(0, len(idx), chunk):
            part = idx[s:s + chunk]
            cc = np.stack([contexts[i][0] for i in part]).astype(dtype)
            cv = np.stack([contexts[i][1] for i in part])[..., None].astype(dtype)
            m, sd = forward(params, cfg, cc, cv)
            mu[part] = m.data[:, 0]
            sigma[part] = sd.data[:, 0]
    return mu, sigma


def predict_pixels(grid: DemGrid, rows: Sequence[int], cols: Sequence[int], usable: np.ndarray,
                   spec: WindowSpec, sampler: SamplerConfig, params: Mapping[str, np.ndarray],
                   cfg: ModelConfig, stats: ElevationStats, chunk: int = 256) -> Prediction:
    """Predict elevations at pixel-centre targets from ``usable`` pixels.

    Targets with fewer than K window observations use all of them; targets
    with none are flagged in ``Prediction.ok``. Context selection is seeded
    by ``sampler.seed`` so repeated calls agree bit for bit.
    """
    rng = np.random.default_rng(sampler.seed)
    tensors = as_tensors(params)
    dtype = next(iter(params.values())).dtype
    contexts = []
    transforms = []
    for r, c in zip(rows, cols):
        r, c = int(r), int(c)
        try:
            rel, z, tf = pixel_context(grid, r, c, usable, spec, sampler, stats, rng)
        except InsufficientContextError:
            n = int(_window_usable(grid, r, c, usable, spec).sum()) - int(usable[r, c])
            if n <= 0:
                contexts.append(None)
                transforms.append(None)
                continue
            rel, z, tf = pixel_context(grid, r, c, usable, spec, sampler, stats, rng, K=n)
        contexts.append((rel, z))
        transforms.append(tf)
    mu_z, sd_z = _run_groups(tensors, cfg, contexts, dtype, chunk)
    ok = np.array([t is not None for t in transforms], dtype=bool)
    mu = np.full(len(contexts), np.nan)
    sd = np.full(len(contexts), np.nan)
    for i, tf in enumerate(transforms):
        if tf is not None:
            mu[i] = tf.denormalize(mu_z[i])
            sd[i] = tf.denormalize_std(sd_z[i])
    return Prediction(mu, sd, ok)


def _window_usable(grid, r, c, usable, spec):
    hr, hc = spec.half_cells(grid.cell_size)
    return usable[max(0, r - hr):r + hr + 1, max(0, c - hc):c + hc + 1]


def predict(grid: DemGrid, targets: np.ndarray, spec: WindowSpec, sampler: SamplerConfig,
            params: Mapping[str, np.ndarray], cfg: ModelConfig, stats: ElevationStats,
            usable: Optional[np.ndarray] = None, chunk: int = 256) -> Prediction:
    """Predict at arbitrary map coordinates ``targets`` of shape ``(M, 2)``."""
    if usable is None:
        usable = grid.observed
    rng = np.random.default_rng(sampler.seed)
    tensors = as_tensors(params)
    dtype = next(iter(params.values())).dtype
    contexts, transforms = [], []
    for x, y in np.asarray(targets, dtype=np.float64).reshape(-1, 2):
        ctx = context_for_point(grid, (x, y), usable, spec, sampler, stats, rng)
        if ctx is None:
            contexts.append(None)
            transforms.append(None)
        else:
            contexts.append((ctx.coords, ctx.values))
            transforms.append(ctx.transform)
    mu_z, sd_z = _run_groups(tensors, cfg, contexts, dtype, chunk)
    ok = np.array([t is not None for t in transforms], dtype=bool)
    mu = np.full(len(contexts), np.nan)
    sd = np.full(len(contexts), np.nan)
    for i, tf in enumerate(transforms):
        if tf is not None:
            mu[i] = tf.denormalize(mu_z[i])
            sd[i] = tf.denormalize_std(sd_z[i])
    return Prediction(mu, sd, ok)
