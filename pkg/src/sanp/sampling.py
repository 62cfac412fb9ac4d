"""Sparse context selection and geometric augmentation.

Context points are drawn without replacement with weight
``exp(-distance / alpha)``, using exponential-race keys: each candidate gets
``log(E) + distance / alpha`` with ``E ~ Exp(1)`` and the K smallest keys win.
``alpha = 0`` selects the K nearest points and ``alpha = inf`` samples
uniformly. The target pixel itself is never a candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .raster import (
    DemGrid,
    ElevationStats,
    InsufficientDataError,
    RelativeTransform,
    Splits,
    Window,
    WindowSpec,
    extract_window,
    to_relative,
    window_pixels,
)


class InsufficientContextError(ValueError):
    """Fewer than K candidate context points are available."""


@dataclass(frozen=True)
class SamplerConfig:
    """Context count K, sampling temperature alpha (metres) and seed."""

    K: int = 100
    alpha: float = 400.0
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not self.alpha >= 0:
            raise ValueError("alpha must be non-negative (inf allowed)")


@dataclass(frozen=True, eq=False)
class ContextSet:
    """K observations in the target-relative frame.

    ``coords`` are window-normalised offsets from the target, ``values`` are
    standardised elevations and ``transform`` maps standardised values back to
    metres.
    """

    coords: np.ndarray
    values: np.ndarray
    transform: RelativeTransform
    index: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class AugmentParams:
    theta: float = 0.0
    s: float = 1.0

    def __post_init__(self):
        if not 0 <= self.theta < 2 * math.pi:
            raise ValueError("theta must lie in [0, 2 pi)")
        if not 0.5 <= self.s <= 1.5:
            raise ValueError("scale must lie in [0.5, 1.5]")

    @classmethod
    def draw(cls, rng: np.random.Generator) -> "AugmentParams":
        theta = float(rng.uniform(0.0, 2 * math.pi))
        s = float(rng.uniform(0.5, 1.5))
        return cls(theta % (2 * math.pi), s)


def select_context(dist: np.ndarray, K: int, alpha: float, rng: np.random.Generator,
                   order: Optional[np.ndarray] = None) -> np.ndarray:
    """Positions of K candidates drawn with weight ``exp(-dist / alpha)``.

    Candidates with zero distance (the target) are never drawn.

    Args:
        dist: distances of the candidates to the target.
        K: number of points to draw without replacement.
        alpha: temperature; 0 takes the K nearest, inf samples uniformly.
        rng: random stream; untouched when ``alpha == 0``.
        order: tie-break key for ``alpha == 0`` (defaults to position, which is
            row-major order for window queries).

    Raises:
        InsufficientContextError: fewer than K candidates besides the target.
    """
    dist = np.asarray(dist, dtype=np.float64)
    cand = np.flatnonzero(dist > 0)
    if cand.size < K:
        raise InsufficientContextError(f"need {K} context points, only {cand.size} available")
    d = dist[cand]
    if alpha == 0:
        tie = cand if order is None else np.asarray(order)[cand]
        pick = np.lexsort((tie, d))[:K]
        return cand[pick]
    keys = np.log(rng.exponential(size=cand.size))
    if math.isfinite(alpha):
        keys = keys + d / alpha
    if K < cand.size:
        part = np.argpartition(keys, K - 1)[:K]
    else:
        part = np.arange(cand.size)
    part = part[np.argsort(keys[part], kind="stable")]
    return cand[part]


def sample_context(window: Window, target: Tuple[float, float], cfg: SamplerConfig,
                   spec: WindowSpec, stats: ElevationStats,
                   rng: Optional[np.random.Generator] = None, K: Optional[int] = None) -> ContextSet:
    """Draw a context set from a window and move it into the relative frame.

    ``K`` overrides ``cfg.K``, e.g. when a target has fewer candidates.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    k = cfg.K if K is None else K
    dist = np.hypot(window.coords[:, 0] - target[0], window.coords[:, 1] - target[1])
    pick = select_context(dist, k, cfg.alpha, rng, order=window.index)
    rel, vals, tf = to_relative(window.coords[pick], window.values[pick], target, spec, stats)
    return ContextSet(rel, vals, tf, window.index[pick])


def augment(ctx: ContextSet, params: AugmentParams) -> ContextSet:
    """Rotate coordinates about the target and scale elevations.

    Both rotated components are computed from the original coordinates.
    """
    if params.theta == 0.0:
        coords = ctx.coords
    else:
        c, s = math.cos(params.theta), math.sin(params.theta)
        x, y = ctx.coords[:, 0], ctx.coords[:, 1]
        coords = np.stack([x * c - y * s, x * s + y * c], axis=1)
    values = ctx.values if params.s == 1.0 else ctx.values * params.s
    return replace(ctx, coords=coords, values=values)


@dataclass(frozen=True, eq=False)
class TrainingBatch:
    """Collated triplets. Targets sit at the origin of each context frame.

    Attributes:
        ctx_coords: ``(B, K, 2)`` relative coordinates.
        ctx_values: ``(B, K, 1)`` standardised elevations.
        target_values: ``(B,)`` standardised target elevations.
        target_index: ``(B,)`` flat pixel indices of the targets.
    """

    ctx_coords: np.ndarray
    ctx_values: np.ndarray
    target_values: np.ndarray
    target_index: np.ndarray

    def __len__(self) -> int:
        return len(self.target_index)


def pixel_context(grid: DemGrid, row: int, col: int, usable: np.ndarray, spec: WindowSpec,
                  cfg: SamplerConfig, stats: ElevationStats, rng: np.random.Generator,
                  K: Optional[int] = None):
    """Sample a context set for the pixel-centre target ``(row, col)``.

    Returns:
        ``(rel_coords, std_values, transform)``.
    """
    k = cfg.K if K is None else K
    dr, dc = window_pixels(grid, row, col, spec, usable)
    cs = grid.cell_size
    dist = np.hypot(dr, dc) * cs
    pick = select_context(dist, k, cfg.alpha, rng)
    rel = np.empty((k, 2))
    rel[:, 0] = dc[pick] * cs / (spec.w_lambda / 2)
    rel[:, 1] = -dr[pick] * cs / (spec.w_phi / 2)
    raw = grid.elevations[row + dr[pick], col + dc[pick]].astype(np.float64)
    tf = RelativeTransform(float(raw.mean()), stats.std)
    return rel, tf.normalize(raw), tf


def sample_training_batch(grid: DemGrid, splits: Splits, spec: WindowSpec, cfg: SamplerConfig,
                          B: int, stats: ElevationStats, rng: np.random.Generator,
                          augmentation: bool = True, max_redraws: int = 1000) -> TrainingBatch:
    """Draw B training triplets.

    Targets are uniform over training pixels. Each context is drawn from the
    training pixels in the target's window; targets without K candidates are
    redrawn. With ``augmentation`` the context is rotated and the context and
    target elevations are scaled by the same factor.

    Raises:
        InsufficientDataError: fewer than K + 1 training pixels, or no target
            with enough context found within ``max_redraws`` attempts.
    """
    if B < 1:
        raise ValueError("batch size must be at least 1")
    train_idx = np.flatnonzero(splits.train_mask.reshape(-1))
    if train_idx.size < cfg.K + 1:
        raise InsufficientDataError(
            f"dataset has {train_idx.size} training pixels, needs at least K + 1 = {cfg.K + 1}")
    coords = np.empty((B, cfg.K, 2), dtype=np.float32)
    values = np.empty((B, cfg.K, 1), dtype=np.float32)
    targets = np.empty(B, dtype=np.float32)
    index = np.empty(B, dtype=np.int64)
    ncols = grid.ncols
    misses = 0
    i = 0
    while i < B:
        flat = int(train_idx[rng.integers(train_idx.size)])
        row, col = divmod(flat, ncols)
        try:
            rel, z, tf = pixel_context(grid, row, col, splits.train_mask, spec, cfg, stats, rng)
        except InsufficientContextError:
            misses += 1
            if misses > max_redraws:
                raise InsufficientDataError("could not find targets with enough context") from None
            continue
        zt = float(tf.normalize(grid.elevations[row, col]))
        if augmentation:
            aug = AugmentParams.draw(rng)
            ctx = augment(ContextSet(rel, z, tf), aug)
            rel, z = ctx.coords, ctx.values
            zt = zt * aug.s
        coords[i] = rel
        values[i, :, 0] = z
        targets[i] = zt
        index[i] = flat
        i += 1
    return TrainingBatch(coords, values, targets, index)


def context_for_point(grid: DemGrid, target: Tuple[float, float], usable: np.ndarray,
                      spec: WindowSpec, cfg: SamplerConfig, stats: ElevationStats,
                      rng: np.random.Generator) -> Optional[ContextSet]:
    """Context for an arbitrary map coordinate, shrinking K when the window is sparse.

    Returns None when the window holds no usable observation.
    """
    win = extract_window(grid, target, spec, usable)
    dist = np.hypot(win.coords[:, 0] - target[0], win.coords[:, 1] - target[1])
    n = int(np.count_nonzero(dist > 0))
    if n == 0:
        return None
    return sample_context(win, target, cfg, spec, stats, rng, K=min(cfg.K, n))
