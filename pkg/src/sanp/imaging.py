"""8-bit greyscale rendering of elevation and uncertainty rasters."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .raster import DemGrid


def write_png(grid: DemGrid, path: str, units: str = "m") -> str:
    """Write ``grid`` as a min/max-stretched greyscale PNG plus a text sidecar.

    Observed cells map linearly onto 1..255 and no-data cells are 0, so a
    pixel value ``p > 0`` decodes to ``min + (p - 1) / 254 * (max - min)``.
    The sidecar (``<path>.txt``) records min, max and that formula.

    Returns:
        The sidecar path.
    """
    z = grid.elevations.astype(np.float64)
    obs = grid.observed
    img = np.zeros(grid.shape, dtype=np.uint8)
    if obs.any():
        lo, hi = float(z[obs].min()), float(z[obs].max())
        span = hi - lo
        scaled = (z[obs] - lo) / span if span > 0 else np.zeros(int(obs.sum()))
        img[obs] = (1 + np.rint(scaled * 254)).astype(np.uint8)
    else:
        lo = hi = float("nan")
    Image.fromarray(img).save(path, format="PNG")
    sidecar = path + ".txt"
    with open(sidecar, "w") as fh:
        fh.write(f"min={lo!r}\nmax={hi!r}\nunits={units}\nnodata_pixel=0\n"
                 "decode=min+(pixel-1)/254*(max-min)\n")
    return sidecar
