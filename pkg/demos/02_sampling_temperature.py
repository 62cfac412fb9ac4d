"""How the temperature alpha shapes the context a target sees.

For a pixel in the middle of a tile we draw 100 context points many times.
Each time we record how far away the chosen points are. At alpha = 0 the
draw is simply the 100 nearest pixels. As alpha grows, the draw spreads out
until it is uniform over the window at alpha = inf.
"""

import math

import numpy as np

from sanp.raster import WindowSpec, synth_terrain, window_pixels
from sanp.sampling import select_context

grid = synth_terrain(128, seed=0)
dr, dc = window_pixels(grid, 64, 64, WindowSpec())
dist = np.hypot(dr, dc) * grid.cell_size
print(f"window holds {int((dist > 0).sum())} candidates around the target")

rng = np.random.default_rng(0)
for alpha in (0.0, 20.0, 80.0, 400.0, 4000.0, math.inf):
    picked = np.concatenate([dist[select_context(dist, 100, alpha, rng)] for _ in range(200)])
    label = "inf" if math.isinf(alpha) else f"{alpha:g} m"
    print(f"alpha {label:>7}: median distance {np.median(picked):6.1f} m, "
          f"farthest {picked.max():6.1f} m")
