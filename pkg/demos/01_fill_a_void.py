"""Fill a hole in a synthetic elevation model and compare against interpolation.

We make a fractal terrain tile, cut voids into it, train a small network on
what is left and then ask it for every missing pixel. Because the tile is
synthetic we still know the true heights and can score each method.

Run with ``python demos/01_fill_a_void.py`` (about a minute).
"""

import numpy as np

from sanp.baselines import METHODS, pixel_targets
from sanp.metrics import compute_metrics
from sanp.model import ModelConfig, predict_pixels
from sanp.raster import WindowSpec, holdout_split_spec, make_splits, punch_voids, synth_terrain
from sanp.sampling import SamplerConfig
from sanp.training import TrainConfig, train

truth = synth_terrain(64, seed=2)
voided = punch_voids(truth, 0.05, seed=2, kind="mixed")
holes = np.flatnonzero(voided.nodata_mask.reshape(-1))
print(f"{holes.size} of {truth.elevations.size} pixels are missing")

# Training only ever sees observed pixels; 5% of them are held back for validation.
splits = make_splits(voided, holdout_split_spec(voided, 0.05, seed=0))
sampler = SamplerConfig(K=50, alpha=400.0)
model, report = train(voided, splits, WindowSpec(), sampler, ModelConfig(D=64, hidden=128),
                      TrainConfig(B=16, max_iters=300, eval_every=50, patience=10, lr=1e-3))
print(f"trained {len(report.losses)} iterations, stopped because: {report.stop_reason}")

rows, cols = np.divmod(holes, truth.ncols)
pred = predict_pixels(voided, rows, cols, voided.observed, model.window, model.sampler, model.params,
                      model.model_cfg, model.stats)
actual = truth.elevations.reshape(-1)[holes].astype(np.float64)
ok = pred.ok
net = compute_metrics(pred.mu[ok], actual[ok], pred.sigma[ok])
print(f"network   MAE {net.mae:6.3f} m  RMSE {net.rmse:6.3f} m  NLL {net.nll:6.3f}")

targets = pixel_targets(voided, holes)
for name, fn in METHODS.items():
    m = compute_metrics(fn(voided, targets, voided.observed), actual)
    print(f"{name:9s} MAE {m.mae:6.3f} m  RMSE {m.rmse:6.3f} m")

# Only the network gives an uncertainty. Large sigma should flag large errors.
err = np.abs(pred.mu[ok] - actual[ok])
print(f"correlation between |error| and sigma: {np.corrcoef(err, pred.sigma[ok])[0, 1]:.2f}")
