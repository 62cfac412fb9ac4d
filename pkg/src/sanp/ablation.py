"""Hyperparameter sweeps and inference-time measurement."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .metrics import MetricsReport
from .model import ModelConfig, as_tensors, forward
from .raster import DemGrid, Splits, WindowSpec
from .sampling import SamplerConfig, pixel_context
from .training import TrainConfig, TrainedModel, evaluate_heldout, train

logger = logging.getLogger(__name__)

AXES = ("K", "alpha", "D")

# Default sweep values per axis; alpha in km.
DEFAULT_VALUES = {
    "K": [50, 100, 200, 500, 1000],
    "alpha": [math.inf, 8, 0.8, 0.4, 0.16, 0.08, 0],
    "D": [128, 256, 512, 768, 1024],
}

CSV_HEADER = ("axis_value", "nll", "mae", "rmse", "rel_time", "status")


def format_value(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return f"{v:g}"


@dataclass
class AblationCell:
    value: float
    metrics: Optional[MetricsReport] = None
    seconds_per_target: Optional[float] = None
    rel_time: Optional[float] = None
    status: str = "ok"
    error: str = ""


@dataclass
class AblationGrid:
    axis: str
    cells: List[AblationCell] = field(default_factory=list)

    def sorted_cells(self) -> List[AblationCell]:
        return sorted(self.cells, key=lambda c: c.value)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in self.sorted_cells():
            m = c.metrics
            w.writerow([
                format_value(c.value),
                "" if m is None or m.nll is None else f"{m.nll:.6g}",
                "" if m is None else f"{m.mae:.6g}",
                "" if m is None else f"{m.rmse:.6g}",
                "" if c.rel_time is None else f"{c.rel_time:.4g}",
                c.status,
            ])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"ablation over {self.axis}"]
        ok = [c for c in self.cells if c.status == "ok"]
        for c in self.sorted_cells():
            if c.status == "ok":
                m = c.metrics
                nll = "-" if m.nll is None else f"{m.nll:.4f}"
                lines.append(f"  {self.axis}={format_value(c.value)}: NLL {nll}  MAE {m.mae:.4f}  "
                             f"RMSE {m.rmse:.4f}  rel. time {c.rel_time:.3g}")
            else:
                lines.append(f"  {self.axis}={format_value(c.value)}: failed ({c.error})")
        if ok:
            best = min(ok, key=lambda c: c.metrics.rmse)
            lines.append(f"  lowest RMSE at {self.axis}={format_value(best.value)}")
        return "\n".join(lines) + "\n"


def _apply(axis: str, value: float, sampler: SamplerConfig, model_cfg: ModelConfig):
    if axis == "K":
        return replace(sampler, K=int(value)), model_cfg
    if axis == "alpha":
        return replace(sampler, alpha=float(value)), model_cfg
    if axis == "D":
        return sampler, replace(model_cfg, D=int(value))
    raise ValueError(f"unknown ablation axis {axis!r}; choose from {AXES}")


def run_ablation(grid: DemGrid, splits: Splits, window: WindowSpec, sampler: SamplerConfig,
                 model_cfg: ModelConfig, train_cfg: TrainConfig, axis: str, values: Sequence[float],
                 scale: float = 1.0, heldout: Optional[np.ndarray] = None) -> AblationGrid:
    """Train and score one model per axis value, everything else held fixed.

    ``scale`` converts the listed values into model units (e.g. 1000 for alpha
    given in km). A run that raises is recorded as ``failed`` and the sweep
    carries on. Relative time is the per-target evaluation time divided by
    that of the smallest successful axis value.
    """
    if axis not in AXES:
        raise ValueError(f"unknown ablation axis {axis!r}; choose from {AXES}")
    if len(set(values)) != len(values):
        raise ValueError("ablation values must be distinct")
    if heldout is None:
        heldout = splits.test
    out = AblationGrid(axis)
    for v in values:
        cell = AblationCell(float(v))
        try:
            s, m = _apply(axis, float(v) * scale, sampler, model_cfg)
            model, _ = train(grid, splits, window, s, m, train_cfg)
            report, _ = evaluate_heldout(model, grid, heldout, splits.train_mask)
            cell.metrics = report
            cell.seconds_per_target = report.wall_seconds / max(1, report.n_points)
        except Exception as exc:  # one failed cell must not abort the sweep
            logger.warning("ablation %s=%s failed: %s", axis, v, exc)
            cell.status = "failed"
            cell.error = f"{type(exc).__name__}: {exc}"
        out.cells.append(cell)
    ok = [c for c in out.cells if c.status == "ok"]
    if ok:
        ref = min(ok, key=lambda c: c.value).seconds_per_target
        for c in ok:
            c.rel_time = c.seconds_per_target / ref if ref else None
    return out


def time_inference(model: TrainedModel, grid: DemGrid, usable: np.ndarray, targets: np.ndarray,
                   K_values: Sequence[int], repeats: int = 5) -> Dict[int, float]:
    """Median per-target forward time for each K, relative to the smallest K.

    Contexts are drawn up front so only the network is timed. Each K gets one
    untimed warm-up pass and ``repeats`` (at least 5) timed passes.

    Returns:
        ``{K: relative_time}``. The absolute medians (seconds per target) are
        left in ``time_inference.last_seconds`` and the spread of the timed
        passes (standard deviation over median) in ``time_inference.last_spread``.
    """
    repeats = max(5, repeats)
    tensors = as_tensors(model.params)
    dtype = next(iter(model.params.values())).dtype
    seconds: Dict[int, float] = {}
    spread: Dict[int, float] = {}
    rows, cols = np.divmod(np.asarray(targets), grid.ncols)
    for K in sorted(K_values):
        s = replace(model.sampler, K=int(K))
        rng = np.random.default_rng(s.seed)
        ctx = [pixel_context(grid, int(r), int(c), usable, model.window, s, model.stats, rng)
               for r, c in zip(rows, cols)]
        cc = np.stack([c[0] for c in ctx]).astype(dtype)
        cv = np.stack([c[1] for c in ctx])[..., None].astype(dtype)
        forward(tensors, model.model_cfg, cc, cv)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            forward(tensors, model.model_cfg, cc, cv)
            times.append((time.perf_counter() - t0) / len(ctx))
        seconds[int(K)] = float(np.median(times))
        spread[int(K)] = float(np.std(times) / seconds[int(K)])
    time_inference.last_seconds = dict(seconds)
    time_inference.last_spread = spread
    base = seconds[min(seconds)]
    return {k: v / base for k, v in seconds.items()}
