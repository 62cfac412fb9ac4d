import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sanp import sampling
from sanp.raster import DemGrid, ElevationStats, InsufficientDataError, WindowSpec, extract_window, make_splits, \
    SplitSpec
from sanp.sampling import (AugmentParams, ContextSet, InsufficientContextError, SamplerConfig, augment,
                           context_for_point, pixel_context, sample_context, sample_training_batch, select_context)


def brute_knn(dist, K):
    """K nearest positive-distance candidates, ties by position."""
    cand = [i for i in range(len(dist)) if dist[i] > 0]
    cand.sort(key=lambda i: (dist[i], i))
    return np.array(cand[:K])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 60))
def test_alpha_zero_is_k_nearest(seed, K):
    rng = np.random.default_rng(seed)
    # integer grid offsets produce many exact ties
    dr, dc = np.divmod(np.arange(121), 11)
    dist = np.hypot(dr - 5, dc - 5)
    keep = rng.random(121) < 0.7
    dist = dist[keep]
    if (dist > 0).sum() < K:
        with pytest.raises(InsufficientContextError):
            select_context(dist, K, 0.0, rng)
        return
    assert np.array_equal(select_context(dist, K, 0.0, rng), brute_knn(dist, K))


def test_alpha_zero_does_not_consume_randomness():
    rng = np.random.default_rng(3)
    select_context(np.arange(10.0), 3, 0.0, rng)
    assert rng.random() == np.random.default_rng(3).random()


def test_uniform_inclusion_probabilities():
    rng = np.random.default_rng(0)
    dist = np.linspace(1, 40, 30)
    K, n = 6, 20000
    counts = np.zeros(30)
    for _ in range(n):
        counts[select_context(dist, K, math.inf, rng)] += 1
    np.testing.assert_allclose(counts / n, K / 30, atol=0.015)


def test_single_draw_follows_exponential_weights():
    rng = np.random.default_rng(1)
    dist = np.array([0.0, 1.0, 2.0, 3.0, 5.0])
    alpha = 1.5
    n = 40000
    counts = np.bincount([select_context(dist, 1, alpha, rng)[0] for _ in range(n)], minlength=5)
    w = np.exp(-dist[1:] / alpha)
    np.testing.assert_allclose(counts[1:] / n, w / w.sum(), atol=0.01)
    assert counts[0] == 0


def test_target_never_selected():
    rng = np.random.default_rng(2)
    dist = np.array([0.0] + list(np.arange(1.0, 20.0)))
    for alpha in (0.0, 0.5, 5.0, math.inf):
        for _ in range(500):
            assert 0 not in select_context(dist, 19, alpha, rng)


def test_selection_is_distinct_and_seeded():
    dist = np.arange(1.0, 200.0)
    a = select_context(dist, 50, 20.0, np.random.default_rng(9))
    b = select_context(dist, 50, 20.0, np.random.default_rng(9))
    assert np.array_equal(a, b) and len(set(a)) == 50


def test_lower_temperature_draws_closer_points():
    rng = np.random.default_rng(4)
    dist = np.arange(1.0, 500.0)
    mean_d = {a: np.mean([dist[select_context(dist, 20, a, rng)].mean() for _ in range(200)])
              for a in (5.0, 50.0, math.inf)}
    assert mean_d[5.0] < mean_d[50.0] < mean_d[math.inf]


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(K=0)
    with pytest.raises(ValueError):
        SamplerConfig(alpha=-1.0)
    with pytest.raises(ValueError):
        SamplerConfig(alpha=float("nan"))


# ---------------------------------------------------------------- grid paths


def small_grid(rng, n=30, void=0.2):
    return DemGrid(rng.normal(size=(n, n)).astype(np.float32), rng.random((n, n)) < void, 5.0, (0.0, 0.0))


def test_pixel_context_matches_window_path(rng):
    g = small_grid(rng)
    spec, stats = WindowSpec(60, 80), ElevationStats(0.0, 2.0)
    cfg = SamplerConfig(K=15, alpha=0.0)
    for r, c in ((3, 4), (15, 15), (29, 0)):
        rel, z, tf = pixel_context(g, r, c, g.observed, spec, cfg, stats, rng)
        x, y = g.pixel_center(r, c)
        ctx = sample_context(extract_window(g, (float(x), float(y)), spec), (float(x), float(y)), cfg, spec, stats)
        np.testing.assert_allclose(rel, ctx.coords, atol=1e-12)
        np.testing.assert_allclose(z, ctx.values, atol=1e-12)
        assert tf.offset == pytest.approx(ctx.transform.offset)


def test_context_uses_only_usable_pixels(rng):
    g = small_grid(rng, void=0.0)
    usable = rng.random(g.shape) < 0.5
    spec = WindowSpec(40, 40)
    r, c = 12, 17
    for _ in range(50):
        rel, _, _ = pixel_context(g, r, c, usable, spec, SamplerConfig(5, math.inf), ElevationStats(0, 1), rng)
        cols = np.rint(rel[:, 0] * 20 / 5).astype(int)
        rows = -np.rint(rel[:, 1] * 20 / 5).astype(int)
        assert usable[r + rows, c + cols].all()
        assert not np.any((rows == 0) & (cols == 0))


def test_context_normalisation(rng):
    g = small_grid(rng)
    rel, z, tf = pixel_context(g, 10, 10, g.observed, WindowSpec(100, 100), SamplerConfig(20, 30.0),
                               ElevationStats(0.0, 3.0), rng)
    assert np.abs(rel).max() <= 1.0 + 1e-12
    assert abs(z.mean()) < 1e-12
    assert tf.scale == 3.0


def test_insufficient_context(rng):
    g = small_grid(rng)
    with pytest.raises(InsufficientContextError):
        pixel_context(g, 0, 0, g.observed, WindowSpec(10, 10), SamplerConfig(50, 0.0), ElevationStats(0, 1), rng)


def test_context_for_point_shrinks_k(rng):
    g = small_grid(rng)
    spec = WindowSpec(20, 20)
    x, y = g.pixel_center(10, 10)
    ctx = context_for_point(g, (float(x), float(y)), g.observed, spec, SamplerConfig(500, 0.0),
                            ElevationStats(0, 1), rng)
    assert 0 < len(ctx) < 500
    empty = np.zeros(g.shape, bool)
    assert context_for_point(g, (float(x), float(y)), empty, spec, SamplerConfig(5), ElevationStats(0, 1), rng) is None


# ---------------------------------------------------------------- augmentation


def some_context(rng, k=40):
    from sanp.raster import RelativeTransform
    return ContextSet(rng.uniform(-1, 1, size=(k, 2)), rng.normal(size=k), RelativeTransform(0.0, 1.0))


def test_identity_augmentation(rng):
    ctx = some_context(rng)
    out = augment(ctx, AugmentParams(0.0, 1.0))
    assert np.array_equal(out.coords, ctx.coords) and np.array_equal(out.values, ctx.values)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2 * math.pi, exclude_max=True), st.floats(0.5, 1.5), st.integers(0, 2 ** 32 - 1))
def test_rotation_preserves_distances_and_scale_is_exact(theta, s, seed):
    ctx = some_context(np.random.default_rng(seed))
    out = augment(ctx, AugmentParams(theta, s))
    d0 = np.linalg.norm(ctx.coords[:, None] - ctx.coords[None], axis=-1)
    d1 = np.linalg.norm(out.coords[:, None] - out.coords[None], axis=-1)
    np.testing.assert_allclose(d1, d0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(out.coords, axis=1), np.linalg.norm(ctx.coords, axis=1), atol=1e-12)
    assert np.array_equal(out.values, ctx.values * s)


def test_quarter_turn():
    from sanp.raster import RelativeTransform
    ctx = ContextSet(np.array([[1.0, 0.0]]), np.array([0.0]), RelativeTransform(0, 1))
    np.testing.assert_allclose(augment(ctx, AugmentParams(math.pi / 2, 1.0)).coords, [[0.0, 1.0]], atol=1e-15)


def test_augment_params_validation(rng):
    for bad in ((-0.1, 1.0), (2 * math.pi, 1.0), (0.0, 0.4), (0.0, 1.6)):
        with pytest.raises(ValueError):
            AugmentParams(*bad)
    for _ in range(200):
        p = AugmentParams.draw(rng)
        assert 0 <= p.theta < 2 * math.pi and 0.5 <= p.s <= 1.5


# ---------------------------------------------------------------- batches


def test_training_batch_shapes_and_targets(rng):
    g = small_grid(rng)
    splits = make_splits(g, SplitSpec(0, 20, 20))
    stats = ElevationStats.from_grid(g, splits.train_mask)
    b = sample_training_batch(g, splits, WindowSpec(60, 60), SamplerConfig(10, 20.0), 16, stats, rng)
    assert b.ctx_coords.shape == (16, 10, 2) and b.ctx_values.shape == (16, 10, 1) and len(b) == 16
    assert b.ctx_coords.dtype == np.float32
    assert splits.train_mask.reshape(-1)[b.target_index].all()
    assert np.all(np.linalg.norm(b.ctx_coords, axis=-1) > 0)


def test_batch_augmentation_scales_target_with_context(rng, monkeypatch):
    g = small_grid(rng)
    splits = make_splits(g, SplitSpec(0, 0, 0))
    stats = ElevationStats.from_grid(g)
    args = (g, splits, WindowSpec(60, 60), SamplerConfig(10, 20.0), 8, stats)
    plain = sample_training_batch(*args, np.random.default_rng(5), augmentation=False)
    monkeypatch.setattr(sampling.AugmentParams, "draw", classmethod(lambda cls, r: cls(0.0, 1.5)))
    aug = sample_training_batch(*args, np.random.default_rng(5), augmentation=True)
    assert np.array_equal(aug.target_index, plain.target_index)
    np.testing.assert_allclose(aug.target_values, 1.5 * plain.target_values, rtol=1e-6)
    np.testing.assert_allclose(aug.ctx_values, 1.5 * plain.ctx_values, rtol=1e-6)


def test_batch_needs_enough_training_pixels(rng):
    g = small_grid(rng, n=5, void=0.0)
    splits = make_splits(g, SplitSpec(0, 0, 0))
    with pytest.raises(InsufficientDataError):
        sample_training_batch(g, splits, WindowSpec(50, 50), SamplerConfig(100), 4, ElevationStats(0, 1), rng)
