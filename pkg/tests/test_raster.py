import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from sanp.raster import (DegenerateDataError, DemGrid, ElevationStats, InsufficientDataError, RasterParseError,
                         SplitSpec, WindowSpec, extract_window, holdout_split_spec, load_raster, make_splits,
                         punch_voids, save_raster, synth_terrain, to_relative, window_pixels)


def random_grid(rng, nrows=7, ncols=9, void=0.2):
    elev = rng.normal(scale=100, size=(nrows, ncols)).astype(np.float32)
    return DemGrid(elev, rng.random((nrows, ncols)) < void, 2.5, (123.25, -40.5))


@pytest.mark.parametrize("ext", [".asc", ".sdem"])
def test_round_trip_is_exact(tmp_path, rng, ext):
    g = random_grid(rng)
    p = str(tmp_path / ("g" + ext))
    save_raster(g, p)
    back = load_raster(p)
    assert back == g
    assert np.array_equal(back.elevations[back.observed], g.elevations[g.observed])
    assert back.cell_size == g.cell_size and back.origin == g.origin


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6),
                  elements=st.floats(-1e6, 1e6, width=32)),
       st.integers(0, 2 ** 32 - 1), st.sampled_from(["ascii-grid", "sanp-binary"]))
def test_round_trip_property(tmp_path_factory, elev, seed, fmt):
    mask = np.random.default_rng(seed).random(elev.shape) < 0.3
    g = DemGrid(elev, mask, 5.0, (0.0, 0.0))
    p = str(tmp_path_factory.mktemp("rt") / "g.dat")
    save_raster(g, p, fmt)
    assert load_raster(p, fmt) == g


def test_byte_stable_rewrite(tmp_path, rng):
    g = random_grid(rng)
    a, b = tmp_path / "a.asc", tmp_path / "b.asc"
    save_raster(g, str(a))
    save_raster(load_raster(str(a)), str(b))
    assert a.read_bytes() == b.read_bytes()


def test_ascii_nodata_and_center_header(tmp_path):
    p = tmp_path / "c.asc"
    p.write_text("ncols 2\nnrows 2\nxllcenter 10\nyllcenter 20\ncellsize 4\nNODATA_value -1\n1 -1\n3 4\n")
    g = load_raster(str(p))
    assert g.origin == (8.0, 18.0)
    assert g.nodata_mask.tolist() == [[False, True], [False, False]]
    assert g.elevations[1, 0] == 3


@pytest.mark.parametrize("text, where", [
    ("", "empty"),
    ("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\n1 2\n3 4\n", "cellsize"),
    ("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3\n", ":7:"),
    ("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 x\n", ":7:"),
    ("ncols 2\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 4\n", "expected 3 data rows"),
    ("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0\n1 2\n3 4\n", "non-positive"),
])
def test_ascii_parse_errors(tmp_path, text, where):
    p = tmp_path / "bad.asc"
    p.write_text(text)
    with pytest.raises(RasterParseError, match=where):
        load_raster(str(p))


def test_binary_parse_errors(tmp_path, rng):
    good = tmp_path / "g.sdem"
    save_raster(random_grid(rng), str(good))
    data = good.read_bytes()
    for payload, msg in ((b"", "empty"), (b"XDEM1" + data[5:], "magic"),
                         (data[:20], "truncated"), (data[:-3], "payload")):
        p = tmp_path / "b.sdem"
        p.write_bytes(payload)
        with pytest.raises(RasterParseError, match=msg):
            load_raster(str(p))


def test_grid_validation():
    with pytest.raises(ValueError):
        DemGrid(np.zeros((2, 2)), np.zeros((2, 3), bool), 1.0)
    with pytest.raises(ValueError):
        DemGrid(np.zeros((2, 2)), np.zeros((2, 2), bool), 0.0)
    with pytest.raises(ValueError):
        DemGrid(np.array([[np.nan, 0.0]]), np.zeros((1, 2), bool), 1.0)
    # NaN is fine under the mask
    DemGrid(np.array([[np.nan, 0.0]]), np.array([[True, False]]), 1.0)


def test_grid_is_immutable(rng):
    g = random_grid(rng)
    with pytest.raises(ValueError):
        g.elevations[0, 0] = 1


def test_pixel_geometry_round_trip(rng):
    g = random_grid(rng)
    rr, cc = np.mgrid[0:g.nrows, 0:g.ncols]
    x, y = g.pixel_center(rr, cc)
    r2, c2 = g.to_pixel(x, y)
    np.testing.assert_allclose(r2, rr, atol=1e-9)
    np.testing.assert_allclose(c2, cc, atol=1e-9)
    # row 0 is north
    assert y[0, 0] > y[-1, 0]


def brute_window(g, center, spec, usable):
    out = []
    for r in range(g.nrows):
        for c in range(g.ncols):
            x, y = g.pixel_center(r, c)
            if usable[r, c] and abs(x - center[0]) <= spec.w_lambda / 2 and abs(y - center[1]) <= spec.w_phi / 2:
                out.append(r * g.ncols + c)
    return np.array(out, dtype=np.int64)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 0.99), st.floats(0.01, 0.99),
       st.floats(5, 60), st.floats(5, 60))
def test_extract_window_matches_brute_force(seed, fx, fy, wl, wp):
    rng = np.random.default_rng(seed)
    g = random_grid(rng, 12, 15)
    center = (g.origin[0] + fx * g.ncols * g.cell_size, g.origin[1] + fy * g.nrows * g.cell_size)
    spec = WindowSpec(wl, wp)
    win = extract_window(g, center, spec)
    assert np.array_equal(win.index, brute_window(g, center, spec, g.observed))
    r, c = np.divmod(win.index, g.ncols)
    assert np.array_equal(win.values, g.elevations[r, c])


def test_window_pixels_agree_with_extract_window(rng):
    g = random_grid(rng, 20, 20)
    spec = WindowSpec(25, 35)
    for r, c in ((0, 0), (5, 7), (19, 19), (10, 3)):
        dr, dc = window_pixels(g, r, c, spec)
        x, y = g.pixel_center(r, c)
        win = extract_window(g, (float(x), float(y)), spec)
        assert np.array_equal((r + dr) * g.ncols + (c + dc), win.index)


def test_window_outside_raster(rng):
    g = random_grid(rng)
    with pytest.raises(IndexError):
        extract_window(g, (0.0, 0.0), WindowSpec(10, 10))


def test_window_spec_validation():
    WindowSpec(10, 10).validate(5.0)
    with pytest.raises(ValueError):
        WindowSpec(9, 10).validate(5.0)
    assert WindowSpec(500, 500).half_cells(5.0) == (50, 50)


def test_to_relative_frame_and_inverse(rng):
    coords = rng.uniform(0, 100, size=(30, 2))
    values = rng.normal(50, 10, size=30)
    stats = ElevationStats(3.0, 4.0)
    rel, z, tf = to_relative(coords, values, (50.0, 60.0), WindowSpec(200, 100), stats)
    np.testing.assert_allclose(rel[:, 0], (coords[:, 0] - 50) / 100)
    np.testing.assert_allclose(rel[:, 1], (coords[:, 1] - 60) / 50)
    assert abs(z.mean()) < 1e-12
    np.testing.assert_allclose(tf.denormalize(z), values)
    assert tf.denormalize_std(2.0) == pytest.approx(8.0)


def test_to_relative_zero_spread():
    with pytest.raises(DegenerateDataError):
        to_relative(np.zeros((2, 2)), np.zeros(2), (0, 0), WindowSpec(), ElevationStats(0.0, 0.0))


def test_splits_disjoint_and_deterministic(rng):
    g = random_grid(rng, 30, 30, void=0.1)
    spec = holdout_split_spec(g, 0.1, seed=4)
    a, b = make_splits(g, spec), make_splits(g, spec)
    assert np.array_equal(a.valid, b.valid) and np.array_equal(a.test, b.test)
    assert not set(a.valid) & set(a.test)
    flat_train = a.train_mask.reshape(-1)
    assert not flat_train[a.heldout].any()
    assert g.observed.reshape(-1)[a.heldout].all()
    assert flat_train.sum() + a.heldout.size == g.observed.sum()
    other = make_splits(g, holdout_split_spec(g, 0.1, seed=5))
    assert not np.array_equal(a.test, other.test)


def test_splits_need_enough_pixels():
    g = DemGrid(np.zeros((2, 2)), np.array([[True, True], [True, False]]), 1.0)
    with pytest.raises(InsufficientDataError):
        make_splits(g, SplitSpec(0, 1, 1))


def test_synth_terrain_deterministic_and_bounded():
    a, b = synth_terrain(65, 3), synth_terrain(65, 3)
    assert a == b and a.shape == (65, 65)
    assert a.elevations.min() == pytest.approx(-20) and a.elevations.max() == pytest.approx(20)
    assert synth_terrain(65, 4) != a
    flat = synth_terrain(64, 0, roughness=0.0)
    assert np.all(flat.elevations == 0)
    with pytest.raises(ValueError):
        synth_terrain(32, 0)


def test_rougher_terrain_has_larger_local_variation():
    def local(g):
        return float(np.mean(np.abs(np.diff(g.elevations.astype(np.float64), axis=1))))
    assert local(synth_terrain(128, 2, 0.9)) > local(synth_terrain(128, 2, 0.5))


@pytest.mark.parametrize("kind", ["rect", "blob", "mixed"])
@pytest.mark.parametrize("frac", [0.02, 0.1, 0.3])
def test_void_fraction_within_ten_percent(kind, frac):
    g = synth_terrain(128, 1)
    v = punch_voids(g, frac, seed=7, kind=kind)
    got = v.nodata_mask.mean()
    assert abs(got - frac) <= 0.1 * frac
    assert np.array_equal(v.elevations, g.elevations)


def test_punch_voids_rejects_bad_args():
    g = synth_terrain(64, 1)
    with pytest.raises(ValueError):
        punch_voids(g, 0.1, 0, kind="star")
    with pytest.raises(ValueError):
        punch_voids(g, 1.0, 0)


def test_observed_value_equal_to_sentinel_survives(tmp_path):
    g = DemGrid(np.array([[-99999.0, 1.0]], np.float32), np.array([[False, True]]), 1.0)
    p = str(tmp_path / "s.asc")
    save_raster(g, p)
    assert load_raster(p) == g
