import numpy as np
import pytest
from scipy.interpolate import RegularGridInterpolator

from conftest import plane_grid
from sanp.baselines import interp_cubic, interp_linear, interp_nearest, pixel_targets
from sanp.raster import DemGrid, InsufficientDataError


def interior_points(g, rng, n, margin=2.0):
    r = rng.uniform(margin, g.nrows - 1 - margin, n)
    c = rng.uniform(margin, g.ncols - 1 - margin, n)
    x, y = g.pixel_center(r, c)
    return np.column_stack([x, y]), r, c


@pytest.mark.parametrize("fn", [interp_linear, interp_cubic])
def test_affine_surfaces_reproduced(fn, rng):
    # dyadic coefficients keep the stored float32 samples exact
    g = plane_grid(a=0.25, b=-0.5, c=7.0, cell=2.0, origin=(64.0, 32.0))
    pts, _, _ = interior_points(g, rng, 300)
    vals, fb = fn(g, pts)
    expect = 0.25 * pts[:, 0] - 0.5 * pts[:, 1] + 7.0
    assert np.abs(vals - expect).max() < 1e-9
    assert not fb.any()


def test_bilinear_matches_scipy(rng):
    elev = rng.normal(size=(12, 14)).astype(np.float32)
    g = DemGrid(elev, np.zeros(elev.shape, bool), 1.0)
    _, r, c = interior_points(g, rng, 200, margin=0.0)
    x, y = g.pixel_center(r, c)
    ours, _ = interp_linear(g, np.column_stack([x, y]))
    ref = RegularGridInterpolator((np.arange(12), np.arange(14)), elev.astype(np.float64))(np.column_stack([r, c]))
    np.testing.assert_allclose(ours, ref, atol=1e-9)


def test_bicubic_reproduces_quadratics(rng):
    g = plane_grid(30, 30, a=0, b=0, c=0, cell=1.0, origin=(0.0, 0.0))
    rr, cc = np.mgrid[0:30, 0:30]
    g = g.with_elevations((0.01 * rr ** 2 - 0.02 * rr * cc + 0.3 * cc).astype(np.float32))
    _, r, c = interior_points(g, rng, 200, margin=2.0)
    x, y = g.pixel_center(r, c)
    vals, _ = interp_cubic(g, np.column_stack([x, y]))
    np.testing.assert_allclose(vals, 0.01 * r ** 2 - 0.02 * r * c + 0.3 * c, atol=1e-4)


def test_void_centre_uses_wider_ring_and_stays_exact():
    g = plane_grid(20, 20)
    mask = np.zeros(g.shape, bool)
    mask[10, 10] = True
    g = g.with_mask(mask)
    target = pixel_targets(g, [10 * 20 + 10])
    truth = 0.3 * target[0, 0] - 0.2 * target[0, 1] + 7.0
    for fn in (interp_linear, interp_cubic):
        v, fb = fn(g, target)
        assert fb[0] == 0 and v[0] == pytest.approx(truth, abs=1e-3)


def test_fallback_chain_near_borders_and_voids():
    g = plane_grid(10, 10)
    mask = np.zeros(g.shape, bool)
    mask[:, 4:7] = True
    g = g.with_mask(mask)
    x, y = g.pixel_center(5, 5)
    v, fb = interp_cubic(g, [[x, y]])
    assert fb[0] >= 1  # cubic needs columns 2..8 at spacing 2, linear spacing 2 works
    v2, fb2 = interp_linear(g, [[x, y]])
    assert fb2[0] in (0, 1)
    # a target outside every usable 2x2 and ring falls to nearest
    only = np.ones(g.shape, bool)
    only[0, 0] = False
    lonely = g.with_mask(only)
    v3, fb3 = interp_cubic(lonely, [[x, y]])
    assert fb3[0] == 2 and v3[0] == lonely.elevations[0, 0]


def brute_nearest(g, r, c, usable):
    best = None
    for i in range(g.nrows):
        for j in range(g.ncols):
            if usable[i, j]:
                d = (i - r) ** 2 + (j - c) ** 2
                if best is None or d < best[0]:
                    best = (d, g.elevations[i, j])
    return best[1]


def test_nearest_matches_brute_force_with_ties(rng):
    elev = rng.normal(size=(9, 9)).astype(np.float32)
    mask = rng.random((9, 9)) < 0.6
    mask[4, 4] = True
    g = DemGrid(elev, mask, 1.0)
    r = np.concatenate([rng.integers(0, 9, 40), rng.uniform(0, 8, 40)]).astype(float)
    c = np.concatenate([rng.integers(0, 9, 40), rng.uniform(0, 8, 40)]).astype(float)
    x, y = g.pixel_center(r, c)
    got = interp_nearest(g, np.column_stack([x, y]))
    expect = [brute_nearest(g, a, b, g.observed) for a, b in zip(r, c)]
    np.testing.assert_array_equal(got, expect)


def test_nearest_tie_goes_to_lowest_row_major_index():
    elev = np.array([[1, 0, 2], [0, 0, 0], [3, 0, 4]], np.float32)
    mask = np.ones((3, 3), bool)
    mask[[0, 0, 2, 2], [0, 2, 0, 2]] = False
    g = DemGrid(elev, mask, 1.0)
    assert interp_nearest(g, pixel_targets(g, [4]))[0] == 1.0


def test_constant_grid_gives_exact_constant(rng):
    g = DemGrid(np.full((16, 16), 3.25, np.float32), rng.random((16, 16)) < 0.3, 5.0)
    pts, _, _ = interior_points(g, rng, 50, margin=0)
    for fn in (interp_linear, interp_cubic):
        np.testing.assert_allclose(fn(g, pts)[0], 3.25, atol=1e-12)
    np.testing.assert_array_equal(interp_nearest(g, pts), 3.25)


def test_usable_mask_hides_pixels():
    g = plane_grid(10, 10)
    usable = np.zeros(g.shape, bool)
    usable[9, 9] = True
    assert interp_nearest(g, pixel_targets(g, [0]), usable)[0] == g.elevations[9, 9]
    with pytest.raises(InsufficientDataError):
        interp_nearest(g, pixel_targets(g, [0]), np.zeros(g.shape, bool))


def test_midpoint_and_pixel_centre():
    elev = np.array([[0, 2], [0, 2]], np.float32)
    g = DemGrid(elev, np.zeros((2, 2), bool), 1.0)
    x, y = g.pixel_center(0.5, 0.5)
    assert interp_linear(g, [[x, y]])[0][0] == 1.0
    for fn in (interp_linear, interp_cubic):
        assert fn(g, pixel_targets(g, [1]))[0][0] == 2.0


def test_adjacent_single_pixel():
    mask = np.ones((5, 5), bool)
    mask[2, 3] = False
    g = DemGrid(np.full((5, 5), 9.0, np.float32), mask, 1.0)
    assert interp_nearest(g, pixel_targets(g, [2 * 5 + 2]))[0] == 9.0


def test_cubic_beats_nearest_on_sinusoid(rng):
    rr, cc = np.mgrid[0:40, 0:40]
    elev = (np.sin(rr / 4.0) * np.cos(cc / 5.0)).astype(np.float32)
    g = DemGrid(elev, np.zeros(elev.shape, bool), 1.0)
    pts, r, c = interior_points(g, rng, 500)
    truth = np.sin(r / 4.0) * np.cos(c / 5.0)
    rmse = lambda v: np.sqrt(np.mean((v - truth) ** 2))
    assert rmse(interp_cubic(g, pts)[0]) < rmse(interp_linear(g, pts)[0]) < rmse(interp_nearest(g, pts))
