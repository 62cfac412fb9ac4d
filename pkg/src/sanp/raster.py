"""Elevation rasters: file formats, observation windows, normalisation, splits.

Coordinates are projected metres. Pixel ``(r, c)`` has its centre at::

    easting  = xll + (c + 0.5) * cell_size
    northing = yll + (nrows - r - 0.5) * cell_size

so row 0 is the northmost row, as in the ASCII grid format.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .checkpoint import atomic_write_bytes

ASCII_NODATA = -99999.0
BINARY_MAGIC = b"SDEM1"
_BIN_HEADER = struct.Struct("<QQddd8x")


class RasterParseError(ValueError):
    """Raster file could not be parsed."""


class DegenerateDataError(ValueError):
    """Data cannot be normalised (for instance zero spread)."""


class InsufficientDataError(ValueError):
    """Not enough observed pixels for the requested operation."""


@dataclass(frozen=True, eq=False)
class DemGrid:
    """Elevation raster with a no-data mask (True marks a void pixel)."""

    elevations: np.ndarray
    nodata_mask: np.ndarray
    cell_size: float
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        elev = np.asarray(self.elevations, dtype=np.float32)
        mask = np.asarray(self.nodata_mask, dtype=bool)
        if elev.ndim != 2 or elev.shape != mask.shape or 0 in elev.shape:
            raise ValueError(f"elevations {elev.shape} and mask {mask.shape} must be equal non-empty 2-D shapes")
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if not np.all(np.isfinite(elev[~mask])):
            raise ValueError("observed elevations must be finite")
        elev.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "elevations", elev)
        object.__setattr__(self, "nodata_mask", mask)
        object.__setattr__(self, "cell_size", float(self.cell_size))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def nrows(self) -> int:
        return self.elevations.shape[0]

    @property
    def ncols(self) -> int:
        return self.elevations.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.elevations.shape

    @property
    def observed(self) -> np.ndarray:
        return ~self.nodata_mask

    def pixel_center(self, row, col):
        """Map coordinates of pixel centres (vectorised)."""
        x = self.origin[0] + (np.asarray(col) + 0.5) * self.cell_size
        y = self.origin[1] + (self.nrows - np.asarray(row) - 0.5) * self.cell_size
        return x, y

    def to_pixel(self, x, y):
        """Fractional ``(row, col)`` of map coordinates; integers are pixel centres."""
        col = (np.asarray(x, dtype=np.float64) - self.origin[0]) / self.cell_size - 0.5
        row = self.nrows - 0.5 - (np.asarray(y, dtype=np.float64) - self.origin[1]) / self.cell_size
        return row, col

    def contains(self, x: float, y: float) -> bool:
        x0, y0 = self.origin
        return (x0 <= x <= x0 + self.ncols * self.cell_size) and (y0 <= y <= y0 + self.nrows * self.cell_size)

    def with_mask(self, nodata_mask: np.ndarray) -> "DemGrid":
        return DemGrid(self.elevations, nodata_mask, self.cell_size, self.origin)

    def with_elevations(self, elevations: np.ndarray) -> "DemGrid":
        return DemGrid(elevations, self.nodata_mask, self.cell_size, self.origin)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DemGrid):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.cell_size == other.cell_size
            and self.origin == other.origin
            and np.array_equal(self.nodata_mask, other.nodata_mask)
            and np.array_equal(self.elevations[self.observed], other.elevations[other.observed])
        )

    __hash__ = None


@dataclass(frozen=True)
class WindowSpec:
    """Window extents in metres along easting (``w_lambda``) and northing (``w_phi``)."""

    w_lambda: float = 500.0
    w_phi: float = 500.0

    def validate(self, cell_size: float) -> None:
        if self.w_lambda < 2 * cell_size or self.w_phi < 2 * cell_size:
            raise ValueError(
                f"window {self.w_lambda}x{self.w_phi} m must be at least two cells of {cell_size} m"
            )

    def half_cells(self, cell_size: float) -> Tuple[int, int]:
        """Largest row/column offsets (in pixels) that fall inside the window."""
        eps = 1e-9
        return (int(math.floor(self.w_phi / 2 / cell_size + eps)),
                int(math.floor(self.w_lambda / 2 / cell_size + eps)))


@dataclass(frozen=True)
class Window:
    """Observed pixels inside a window: map coordinates, elevations, flat indices."""

    coords: np.ndarray
    values: np.ndarray
    index: np.ndarray

    def __len__(self) -> int:
        return len(self.index)


# ---------------------------------------------------------------- file formats


def _parse_ascii(text: str, path: str) -> DemGrid:
    lines = text.splitlines()
    if not any(ln.strip() for ln in lines):
        raise RasterParseError(f"{path}: empty file")
    header = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0].lower()
        if key[0].isdigit() or key[0] in "+-.":
            break
        if len(parts) != 2:
            raise RasterParseError(f"{path}:{i + 1}: malformed header line {lines[i]!r}")
        header[key] = parts[1]
        i += 1
    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        cell = float(header["cellsize"])
    except KeyError as exc:
        raise RasterParseError(f"{path}: header is missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise RasterParseError(f"{path}: bad header value ({exc})") from None
    if ncols <= 0 or nrows <= 0 or not cell > 0:
        raise RasterParseError(f"{path}: header declares an empty grid or non-positive cellsize")
    if "xllcorner" in header and "yllcorner" in header:
        x0, y0 = float(header["xllcorner"]), float(header["yllcorner"])
    elif "xllcenter" in header and "yllcenter" in header:
        x0 = float(header["xllcenter"]) - cell / 2
        y0 = float(header["yllcenter"]) - cell / 2
    else:
        raise RasterParseError(f"{path}: header needs xllcorner/yllcorner")
    nodata = float(header.get("nodata_value", ASCII_NODATA))

    rows: List[List[float]] = []
    for lineno in range(i, len(lines)):
        parts = lines[lineno].split()
        if not parts:
            continue
        if len(parts) != ncols:
            raise RasterParseError(
                f"{path}:{lineno + 1}: expected {ncols} values, found {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise RasterParseError(f"{path}:{lineno + 1}: non-numeric value") from None
    if len(rows) != nrows:
        raise RasterParseError(f"{path}: expected {nrows} data rows, found {len(rows)}")
    values = np.array(rows, dtype=np.float64)
    mask = (values == nodata) | ~np.isfinite(values)
    elev = np.where(mask, 0.0, values).astype(np.float32)
    return DemGrid(elev, mask, cell, (x0, y0))


def _ascii_nodata(grid: DemGrid) -> float:
    # the sentinel must not collide with a real observation
    nodata = ASCII_NODATA
    obs = grid.elevations[grid.observed]
    while np.any(obs == np.float32(nodata)):
        nodata = nodata * 10 - 9
    return nodata


def _format_ascii(grid: DemGrid) -> str:
    nodata = _ascii_nodata(grid)
    out = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"xllcorner {grid.origin[0]!r}",
        f"yllcorner {grid.origin[1]!r}",
        f"cellsize {grid.cell_size!r}",
        f"NODATA_value {nodata:.9g}",
    ]
    vals = np.where(grid.nodata_mask, nodata, grid.elevations.astype(np.float64))
    for row in vals:
        # %.9g round-trips float32 exactly
        out.append(" ".join("%.9g" % v for v in row))
    return "\n".join(out) + "\n"


def _parse_binary(data: bytes, path: str) -> DemGrid:
    if len(data) == 0:
        raise RasterParseError(f"{path}: empty file")
    if not data.startswith(BINARY_MAGIC):
        raise RasterParseError(f"{path}: offset 0: missing SDEM1 magic")
    pos = len(BINARY_MAGIC)
    if len(data) < pos + _BIN_HEADER.size:
        raise RasterParseError(f"{path}: offset {pos}: truncated header")
    ncols, nrows, cell, x0, y0 = _BIN_HEADER.unpack_from(data, pos)
    pos += _BIN_HEADER.size
    n = ncols * nrows
    if n == 0 or not cell > 0:
        raise RasterParseError(f"{path}: offset {len(BINARY_MAGIC)}: empty grid or non-positive cell size")
    nmask = (n + 7) // 8
    if len(data) != pos + nmask + 4 * n:
        raise RasterParseError(
            f"{path}: offset {pos}: expected {nmask + 4 * n} payload bytes, found {len(data) - pos}")
    bits = np.frombuffer(data, dtype=np.uint8, count=nmask, offset=pos)
    mask = np.unpackbits(bits, bitorder="little")[:n].astype(bool).reshape(nrows, ncols)
    pos += nmask
    elev = np.frombuffer(data, dtype="<f4", count=n, offset=pos).astype(np.float32).reshape(nrows, ncols)
    return DemGrid(elev, mask, cell, (x0, y0))


def _format_binary(grid: DemGrid) -> bytes:
    head = BINARY_MAGIC + _BIN_HEADER.pack(grid.ncols, grid.nrows, grid.cell_size, *grid.origin)
    bits = np.packbits(grid.nodata_mask.reshape(-1), bitorder="little").tobytes()
    elev = np.where(grid.nodata_mask, np.float32(0), grid.elevations).astype("<f4").tobytes()
    return head + bits + elev


def _resolve_format(path: str, fmt: Optional[str]) -> str:
    if fmt is None:
        ext = os.path.splitext(path)[1].lower()
        fmt = "sanp-binary" if ext in (".sdem", ".bin") else "ascii-grid"
    if fmt not in ("ascii-grid", "sanp-binary"):
        raise RasterParseError(f"unknown raster format {fmt!r}")
    return fmt


def load_raster(path: str, format: Optional[str] = None) -> DemGrid:
    """Read a raster in ``ascii-grid`` or ``sanp-binary`` format.

    When ``format`` is None it is inferred from the extension (``.sdem`` and
    ``.bin`` are binary, anything else ASCII).
    """
    fmt = _resolve_format(path, format)
    with open(path, "rb") as fh:
        data = fh.read()
    if fmt == "sanp-binary":
        return _parse_binary(data, path)
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise RasterParseError(f"{path}: offset {exc.start}: not an ASCII grid") from None
    return _parse_ascii(text, path)


def save_raster(grid: DemGrid, path: str, format: Optional[str] = None) -> None:
    fmt = _resolve_format(path, format)
    payload = _format_binary(grid) if fmt == "sanp-binary" else _format_ascii(grid).encode("ascii")
    atomic_write_bytes(path, payload)


# ---------------------------------------------------------------- windows


def extract_window(grid: DemGrid, center: Tuple[float, float], spec: WindowSpec,
                   usable: Optional[np.ndarray] = None) -> Window:
    """Observed pixels whose centres lie within the window around ``center``.

    Args:
        grid: the raster.
        center: ``(easting, northing)`` in metres.
        spec: window extents.
        usable: optional boolean mask of pixels allowed as observations;
            defaults to every non-void pixel.

    Raises:
        IndexError: ``center`` lies outside the raster.
    """
    x, y = center
    if not grid.contains(x, y):
        raise IndexError(f"window centre {center} lies outside the raster")
    if usable is None:
        usable = grid.observed
    row, col = grid.to_pixel(x, y)
    hr = spec.w_phi / 2 / grid.cell_size
    hc = spec.w_lambda / 2 / grid.cell_size
    r0 = max(0, int(math.floor(row - hr)) - 1)
    r1 = min(grid.nrows, int(math.ceil(row + hr)) + 2)
    c0 = max(0, int(math.floor(col - hc)) - 1)
    c1 = min(grid.ncols, int(math.ceil(col + hc)) + 2)
    rr, cc = np.mgrid[r0:r1, c0:c1]
    px, py = grid.pixel_center(rr, cc)
    inside = (np.abs(px - x) <= spec.w_lambda / 2) & (np.abs(py - y) <= spec.w_phi / 2)
    keep = inside & usable[r0:r1, c0:c1]
    rr, cc = rr[keep], cc[keep]
    coords = np.stack([px[keep], py[keep]], axis=1)
    return Window(coords, grid.elevations[rr, cc], rr * grid.ncols + cc)


def window_pixels(grid: DemGrid, row: int, col: int, spec: WindowSpec,
                  usable: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Fast window query for a pixel-centre target.

    Returns:
        ``(dr, dc)`` integer row/column offsets of usable pixels in the window,
        in row-major order. The target pixel is included when usable.
    """
    if usable is None:
        usable = grid.observed
    hr, hc = spec.half_cells(grid.cell_size)
    r0, r1 = max(0, row - hr), min(grid.nrows, row + hr + 1)
    c0, c1 = max(0, col - hc), min(grid.ncols, col + hc + 1)
    rr, cc = np.nonzero(usable[r0:r1, c0:c1])
    return rr + (r0 - row), cc + (c0 - col)


# ---------------------------------------------------------------- normalisation


@dataclass(frozen=True)
class ElevationStats:
    """Global mean and standard deviation of the training elevations."""

    mean: float
    std: float

    @classmethod
    def from_grid(cls, grid: DemGrid, usable: Optional[np.ndarray] = None) -> "ElevationStats":
        if usable is None:
            usable = grid.observed
        vals = grid.elevations[usable].astype(np.float64)
        if vals.size == 0:
            raise InsufficientDataError("no observed pixels to compute elevation statistics")
        return cls(float(vals.mean()), float(vals.std()))


@dataclass(frozen=True)
class RelativeTransform:
    """Record of the elevation transform ``z = (y - offset) / scale``."""

    offset: float
    scale: float

    def normalize(self, y):
        return (np.asarray(y, dtype=np.float64) - self.offset) / self.scale

    def denormalize(self, z):
        return np.asarray(z, dtype=np.float64) * self.scale + self.offset

    def denormalize_std(self, s):
        return np.asarray(s, dtype=np.float64) * self.scale


def to_relative(coords: np.ndarray, values: np.ndarray, target: Tuple[float, float],
                spec: WindowSpec, stats: ElevationStats):
    """Map window observations into the model's relative, standardised frame.

    Coordinates become ``(x - x*) / (w / 2)`` per axis, so the target sits at the
    origin and the window edges at +-1. Elevations are centred on the mean of
    the given points and divided by the global standard deviation.

    Returns:
        ``(rel_coords, std_values, transform)``.

    Raises:
        DegenerateDataError: the global standard deviation is zero.
    """
    if not stats.std > 0:
        raise DegenerateDataError("global elevation standard deviation is zero")
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    rel = np.empty_like(coords)
    rel[:, 0] = (coords[:, 0] - target[0]) / (spec.w_lambda / 2)
    rel[:, 1] = (coords[:, 1] - target[1]) / (spec.w_phi / 2)
    values = np.asarray(values, dtype=np.float64)
    offset = float(values.mean()) if values.size else 0.0
    tf = RelativeTransform(offset, stats.std)
    return rel, tf.normalize(values), tf


# ---------------------------------------------------------------- splits


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    n_valid: int = 0
    n_test: int = 0


@dataclass(frozen=True, eq=False)
class Splits:
    """Training mask plus flat indices of validation and test pixels."""

    train_mask: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    @property
    def heldout(self) -> np.ndarray:
        return np.concatenate([self.valid, self.test])


def make_splits(grid: DemGrid, spec: SplitSpec) -> Splits:
    """Draw validation and test pixels from observed pixels.

    Held-out pixels are removed from ``train_mask``, so they are never used as
    training targets or as context for any target.
    """
    obs = np.flatnonzero(grid.observed.reshape(-1))
    need = spec.n_valid + spec.n_test
    if spec.n_valid < 0 or spec.n_test < 0 or obs.size < need + 1:
        raise InsufficientDataError(
            f"need at least {need + 1} observed pixels for the split, raster has {obs.size}")
    rng = np.random.default_rng(spec.seed)
    pick = rng.choice(obs.size, size=need, replace=False)
    valid = np.sort(obs[pick[:spec.n_valid]])
    test = np.sort(obs[pick[spec.n_valid:]])
    train = grid.observed.copy().reshape(-1)
    train[valid] = False
    train[test] = False
    return Splits(train.reshape(grid.shape), valid, test)


def holdout_split_spec(grid: DemGrid, fraction: float, seed: int) -> SplitSpec:
    """Split ``fraction`` of observed pixels evenly into validation and test."""
    n = int(round(fraction * int(grid.observed.sum())))
    return SplitSpec(seed=seed, n_valid=n // 2, n_test=n - n // 2)


# ---------------------------------------------------------------- synthetic terrain


def _diamond_square(n: int, roughness: float, rng: np.random.Generator) -> np.ndarray:
    size = n + 1
    h = np.zeros((size, size))
    h[::n, ::n] = rng.normal(size=(2, 2)) * roughness
    step, level = n, 1
    while step > 1:
        half = step // 2
        amp = roughness ** (level + 1)
        # diamond step: square centres
        c = (h[0:-1:step, 0:-1:step] + h[step::step, 0:-1:step]
             + h[0:-1:step, step::step] + h[step::step, step::step]) / 4
        h[half::step, half::step] = c + amp * rng.normal(size=c.shape)
        # square step: edge midpoints, averaging the in-bounds neighbours
        pad = np.pad(h, half, constant_values=np.nan)
        for r0, c0 in ((0, half), (half, 0)):
            rs = np.arange(r0, size, step)
            cs = np.arange(c0, size, step)
            R, C = np.meshgrid(rs + half, cs + half, indexing="ij")
            nb = np.stack([pad[R - half, C], pad[R + half, C], pad[R, C - half], pad[R, C + half]])
            cnt = np.sum(~np.isnan(nb), axis=0)
            avg = np.nansum(nb, axis=0) / cnt
            h[np.ix_(rs, cs)] = avg + amp * rng.normal(size=avg.shape)
        step, level = half, level + 1
    return h


def synth_terrain(size: int, seed: int, roughness: float = 0.6, cell_size: float = 5.0,
                  amplitude: float = 20.0) -> DemGrid:
    """Fractal test terrain from the diamond-square algorithm.

    ``roughness`` is the ratio between the displacement amplitudes of two
    successive refinement levels: 0 gives a flat plane, values near 0.5 give
    smooth rolling relief and values near 1 give rough, noise-like terrain.
    The surface is rescaled into ``[-amplitude, amplitude]`` metres.
    """
    if size < 64:
        raise ValueError("synthetic terrain needs size >= 64")
    if roughness < 0:
        raise ValueError("roughness must be non-negative")
    rng = np.random.default_rng(seed)
    n = 1 << int(math.ceil(math.log2(size - 1)))
    h = _diamond_square(n, roughness, rng)[:size, :size]
    lo, hi = h.min(), h.max()
    if hi - lo > 0:
        h = amplitude * (2 * (h - lo) / (hi - lo) - 1)
    else:
        h = np.zeros_like(h)
    return DemGrid(h.astype(np.float32), np.zeros(h.shape, bool), cell_size, (0.0, 0.0))


def _blob(shape, center, radius, rng) -> np.ndarray:
    rr, cc = np.mgrid[0:shape[0], 0:shape[1]]
    ang = np.arctan2(rr - center[0], cc - center[1])
    phase = rng.uniform(0, 2 * np.pi, size=3)
    wobble = 1 + 0.3 * sum(np.sin((k + 2) * ang + p) / (k + 1) for k, p in enumerate(phase))
    return np.hypot(rr - center[0], cc - center[1]) <= radius * wobble


def punch_voids(grid: DemGrid, fraction: float, seed: int, kind: str = "mixed") -> DemGrid:
    """Add rectangular and/or blob-shaped voids covering about ``fraction`` of the raster.

    The void count lands within 10% of the request.
    """
    if kind not in ("rect", "blob", "mixed"):
        raise ValueError(f"unknown void kind {kind!r}")
    if not 0 <= fraction < 1:
        raise ValueError("void fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    nrows, ncols = grid.shape
    total = nrows * ncols
    target = int(round(fraction * total))
    mask = grid.nodata_mask.copy()
    added = np.zeros_like(mask)
    attempts = 0
    while added.sum() < 0.97 * target and target - added.sum() > 24 and attempts < 10000:
        attempts += 1
        remaining = target - int(added.sum())
        area = min(remaining, int(rng.uniform(0.004, 0.02) * total) + 4)
        use_rect = kind == "rect" or (kind == "mixed" and rng.random() < 0.5)
        if use_rect:
            aspect = rng.uniform(0.4, 2.5)
            h = max(1, min(nrows, int(round(math.sqrt(area * aspect)))))
            w = max(1, min(ncols, area // h))
            r = rng.integers(0, nrows - h + 1)
            c = rng.integers(0, ncols - w + 1)
            shape = np.zeros_like(mask)
            shape[r:r + h, c:c + w] = True
        else:
            radius = math.sqrt(area / math.pi) / 1.05
            center = (rng.uniform(0, nrows), rng.uniform(0, ncols))
            shape = _blob(mask.shape, center, radius, rng)
            if shape.sum() > remaining:
                continue
        added |= shape
    # top up with single pixels so the count lands close to the request
    free = np.flatnonzero(~added.reshape(-1))
    deficit = target - int(added.sum())
    if deficit > 0:
        extra = rng.choice(free, size=deficit, replace=False)
        added.reshape(-1)[extra] = True
    return grid.with_mask(mask | added)
