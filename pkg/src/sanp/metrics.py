"""Reconstruction metrics: NLL (nats per point), MAE and RMSE in metres."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MetricsReport:
    """Scores of one prediction source; ``nll`` is None for point estimates."""

    mae: float
    rmse: float
    n_points: int
    nll: Optional[float] = None
    wall_seconds: float = 0.0

    def __post_init__(self):
        # rmse >= mae up to rounding
        if not (self.mae >= 0 and self.rmse >= self.mae * (1 - 1e-12)):
            raise ValueError(f"inconsistent metrics: mae={self.mae}, rmse={self.rmse}")

    def as_row(self) -> dict:
        return {
            "nll": "" if self.nll is None else f"{self.nll:.6g}",
            "mae": f"{self.mae:.6g}",
            "rmse": f"{self.rmse:.6g}",
            "n_points": str(self.n_points),
        }


def compute_metrics(mu, truth, sigma=None, wall_seconds: float = 0.0) -> MetricsReport:
    """Score predictions against ground truth.

    Args:
        mu: predicted elevations (point estimates or Gaussian means).
        truth: true elevations.
        sigma: predictive standard deviations; omit for non-probabilistic
            methods, in which case NLL is not reported.
    """
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if mu.shape != truth.shape:
        raise ValueError(f"length mismatch: {mu.size} predictions for {truth.size} truths")
    if mu.size == 0:
        raise ValueError("cannot score an empty prediction set")
    err = mu - truth
    mae = float(np.mean(np.abs(err)))
    # scale by the largest error so tiny residuals do not underflow when squared
    big = float(np.max(np.abs(err)))
    rmse = big * math.sqrt(float(np.mean((err / big) ** 2))) if big > 0 else 0.0
    nll = None
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=np.float64).reshape(-1)
        if sigma.shape != mu.shape:
            raise ValueError(f"length mismatch: {sigma.size} sigmas for {mu.size} predictions")
        if not np.all(sigma > 0):
            raise ValueError("sigma must be strictly positive")
        nll = float(np.mean(np.log(sigma) + HALF_LOG_2PI + 0.5 * (err / sigma) ** 2))
    return MetricsReport(mae=mae, rmse=rmse, n_points=int(mu.size), nll=nll, wall_seconds=wall_seconds)
