"""Interpolation baselines for void filling: nearest, bilinear and bicubic.

Targets are map coordinates. Only ``usable`` pixels (default: every observed
pixel) act as data. Bilinear and bicubic work on the 2x2 and 4x4 pixel
neighbourhoods around the target; when the target sits on a void pixel
centre, the neighbourhood is widened to the surrounding ring (the pixel
lattice with spacing 2 centred on the target), which keeps both schemes exact
on planes. Targets whose neighbourhood is still incomplete fall back along
cubic -> linear -> nearest, and the returned ``fallback`` array counts how
many levels each target fell.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .raster import DemGrid, InsufficientDataError

KEYS_A = -0.5


def _keys(s: np.ndarray, a: float = KEYS_A) -> np.ndarray:
    s = np.abs(s)
    out = np.zeros_like(s)
    m1 = s <= 1
    m2 = (s > 1) & (s < 2)
    out[m1] = (a + 2) * s[m1] ** 3 - (a + 3) * s[m1] ** 2 + 1
    out[m2] = a * s[m2] ** 3 - 5 * a * s[m2] ** 2 + 8 * a * s[m2] - 4 * a
    return out


def _frac(grid: DemGrid, targets) -> Tuple[np.ndarray, np.ndarray]:
    t = np.asarray(targets, dtype=np.float64).reshape(-1, 2)
    return grid.to_pixel(t[:, 0], t[:, 1])


def _snap(u: float) -> float:
    # absorb round-off from the metre -> pixel conversion
    r = round(u)
    return float(r) if abs(u - r) < 1e-9 else u


class _NearestIndex:
    def __init__(self, grid: DemGrid, usable: np.ndarray):
        rr, cc = np.nonzero(usable)
        if rr.size == 0:
            raise InsufficientDataError("nearest interpolation needs at least one observed pixel")
        self.rr, self.cc = rr, cc
        self.flat = rr * grid.ncols + cc
        self.values = grid.elevations[rr, cc].astype(np.float64)
        self.tree = cKDTree(np.column_stack([rr, cc]).astype(np.float64))

    def query(self, row: np.ndarray, col: np.ndarray) -> np.ndarray:
        out = np.empty(row.size)
        n = self.rr.size
        for i, (r, c) in enumerate(zip(row, col)):
            k = min(8, n)
            while True:
                _, idx = self.tree.query((r, c), k=k)
                idx = np.atleast_1d(idx)
                d2 = (self.rr[idx] - r) ** 2 + (self.cc[idx] - c) ** 2
                best = d2.min()
                # widen until the tie set is certainly complete
                if k == n or d2.max() > best:
                    break
                k = min(2 * k, n)
            tied = idx[d2 == best]
            out[i] = self.values[tied[np.argmin(self.flat[tied])]]
        return out


def interp_nearest(grid: DemGrid, targets, usable: Optional[np.ndarray] = None) -> np.ndarray:
    """Value of the Euclidean-nearest usable pixel; ties go to the lowest row-major index."""
    if usable is None:
        usable = grid.observed
    row, col = _frac(grid, targets)
    return _NearestIndex(grid, usable).query(row, col)


def _axis_nodes(u: float, kind: str):
    """Candidate node lists and weights along one axis, narrowest first."""
    out = []
    if kind == "linear":
        lo, hi = math.floor(u), math.ceil(u)
        for e in (0, 1):
            a, b = lo - e, hi + e
            if a == b:
                out.append((np.array([a]), np.array([1.0])))
            else:
                t = (u - a) / (b - a)
                out.append((np.array([a, b]), np.array([1 - t, t])))
    else:
        base = math.floor(u)
        for h in (1, 2):
            first = base - 1 if h == 1 else base - 3
            t = (u - base) if h == 1 else (u - (base - 1)) / 2
            nodes = first + h * np.arange(4)
            w = _keys(np.array([1 + t, t, 1 - t, 2 - t]))
            out.append((nodes, w))
    return out


def _blend(grid: DemGrid, usable: np.ndarray, r: float, c: float, kind: str) -> Optional[float]:
    for (rn, rw), (cn, cw) in zip(_axis_nodes(r, kind), _axis_nodes(c, kind)):
        W = np.outer(rw, cw)
        need = W != 0
        R, C = np.meshgrid(rn, cn, indexing="ij")
        R, C = R[need], C[need]
        if R.min() < 0 or C.min() < 0 or R.max() >= grid.nrows or C.max() >= grid.ncols:
            continue
        if not usable[R, C].all():
            continue
        return float(np.dot(W[need], grid.elevations[R, C].astype(np.float64)))
    return None


def _interp(grid: DemGrid, targets, usable, chain) -> Tuple[np.ndarray, np.ndarray]:
    if usable is None:
        usable = grid.observed
    row, col = _frac(grid, targets)
    out = np.empty(row.size)
    fallback = np.zeros(row.size, dtype=np.int8)
    need_nearest = []
    for i, (r, c) in enumerate(zip(row, col)):
        r, c = _snap(r), _snap(c)
        for level, kind in enumerate(chain):
            v = _blend(grid, usable, r, c, kind)
            if v is not None:
                out[i] = v
                fallback[i] = level
                break
        else:
            need_nearest.append(i)
            fallback[i] = len(chain)
    if need_nearest:
        idx = np.array(need_nearest)
        out[idx] = _NearestIndex(grid, usable).query(row[idx], col[idx])
    return out, fallback


def interp_linear(grid: DemGrid, targets, usable: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Bilinear interpolation from the closest 2x2 usable pixels.

    Returns:
        ``(values, fallback)``; ``fallback`` is 1 where nearest was used.
    """
    return _interp(grid, targets, usable, ("linear",))


def interp_cubic(grid: DemGrid, targets, usable: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Separable bicubic convolution (Keys kernel, a = -0.5) over 4x4 usable pixels.

    Returns:
        ``(values, fallback)``; 1 marks a linear fallback, 2 a nearest fallback.
    """
    return _interp(grid, targets, usable, ("cubic", "linear"))


def pixel_targets(grid: DemGrid, flat_index) -> np.ndarray:
    """Map coordinates of pixel centres given flat row-major indices."""
    r, c = np.divmod(np.asarray(flat_index), grid.ncols)
    x, y = grid.pixel_center(r, c)
    return np.column_stack([x, y])


METHODS = {
    "nearest": lambda g, t, u=None: interp_nearest(g, t, u),
    "linear": lambda g, t, u=None: interp_linear(g, t, u)[0],
    "cubic": lambda g, t, u=None: interp_cubic(g, t, u)[0],
}
