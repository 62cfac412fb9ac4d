"""Self-supervised training: batches of masked pixels, NLL objective, Adam."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, save_checkpoint
from .metrics import MetricsReport, compute_metrics
from .model import ModelConfig, Prediction, as_tensors, config_from_params, forward, init_params, predict_pixels
from .raster import DemGrid, ElevationStats, Splits, WindowSpec
from .sampling import SamplerConfig, TrainingBatch, sample_training_batch

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """The loss became non-finite. ``snapshot`` holds the last finite parameters."""

    def __init__(self, message: str, iteration: int, snapshot: Dict[str, np.ndarray]):
        super().__init__(message)
        self.iteration = iteration
        self.snapshot = snapshot


class MemoryBudgetError(MemoryError):
    """The configuration would exceed the allowed activation memory."""


@dataclass(frozen=True)
class TrainConfig:
    B: int = 1024
    max_iters: int = 20000
    eval_every: int = 100
    patience: int = 20
    seed: int = 0
    lr: float = 1e-4
    augmentation: bool = True
    clip_norm: float = 10.0
    eval_points: int = 1024
    memory_budget_mb: Optional[float] = None

    def __post_init__(self):
        if self.B < 1 or self.max_iters < 1 or self.eval_every < 1:
            raise ValueError("B, max_iters and eval_every must be at least 1")


@dataclass
class EvalRecord:
    iteration: int
    train_loss: float
    valid_nll: float
    valid_mae: float
    valid_rmse: float
    seconds: float


@dataclass
class TrainReport:
    records: List[EvalRecord] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    best_iteration: int = 0
    stop_reason: str = ""

    @property
    def best(self) -> Optional[EvalRecord]:
        for r in self.records:
            if r.iteration == self.best_iteration:
                return r
        return None


@dataclass
class TrainedModel:
    """Everything needed to reconstruct with a trained network."""

    params: Dict[str, np.ndarray]
    model_cfg: ModelConfig
    stats: ElevationStats
    window: WindowSpec
    sampler: SamplerConfig


def estimate_memory_mb(model_cfg: ModelConfig, K: int, B: int) -> float:
    """Rough activation footprint of one training step in float32."""
    per_point = 3 * model_cfg.hidden + 16 * model_cfg.D + 4 * K
    return 4.0 * B * K * per_point / 2 ** 20


def loss_batch(batch: TrainingBatch, params: Mapping[str, ad.Tensor], cfg: ModelConfig) -> ad.Tensor:
    """Mean negative log-likelihood of the batch targets."""
    if batch.ctx_coords.shape[1] == 0:
        raise ValueError("every triplet needs a non-empty context")
    mu, sigma = forward(params, cfg, batch.ctx_coords, batch.ctx_values)
    y = ad.Tensor(batch.target_values.reshape(-1, 1).astype(mu.dtype))
    return ad.gaussian_nll(y, mu, sigma)


def evaluate_heldout(model: TrainedModel, grid: DemGrid, heldout: np.ndarray, usable: np.ndarray,
                     chunk: int = 256) -> Tuple[MetricsReport, Prediction]:
    """Score the model on held-out pixels (flat indices) using only ``usable`` pixels as context."""
    heldout = np.asarray(heldout)
    if heldout.size == 0:
        raise ValueError("held-out set is empty")
    t0 = time.perf_counter()
    rows, cols = np.divmod(heldout, grid.ncols)
    pred = predict_pixels(grid, rows, cols, usable, model.window, model.sampler, model.params,
                          model.model_cfg, model.stats, chunk=chunk)
    truth = grid.elevations.reshape(-1)[heldout]
    ok = pred.ok
    report = compute_metrics(pred.mu[ok], truth[ok], pred.sigma[ok], time.perf_counter() - t0)
    return report, pred


def train(grid: DemGrid, splits: Splits, window: WindowSpec, sampler: SamplerConfig,
          model_cfg: ModelConfig, cfg: TrainConfig,
          on_eval: Optional[Callable[[EvalRecord], None]] = None,
          checkpoint_path: Optional[str] = None) -> Tuple[TrainedModel, TrainReport]:
    """Fit the network and keep the parameters with the best validation NLL.

    Training stops after ``cfg.max_iters`` iterations or when validation NLL has
    not improved for ``cfg.patience`` evaluations. When ``checkpoint_path`` is
    given the best parameters are written there (atomically) on every
    improvement.

    Raises:
        TrainingDivergedError: the loss turned NaN or infinite.
        MemoryBudgetError: the activation estimate exceeds ``cfg.memory_budget_mb``.
    """
    if cfg.memory_budget_mb is not None:
        need = estimate_memory_mb(model_cfg, sampler.K, cfg.B)
        if need > cfg.memory_budget_mb:
            raise MemoryBudgetError(f"needs ~{need:.0f} MB, budget is {cfg.memory_budget_mb:.0f} MB")
    window.validate(grid.cell_size)
    stats = ElevationStats.from_grid(grid, splits.train_mask)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(model_cfg, seed=cfg.seed)
    adam = ad.adam_init(params, lr=cfg.lr)
    valid = splits.valid
    if valid.size > cfg.eval_points:
        valid = np.sort(np.random.default_rng(cfg.seed + 1).choice(valid, cfg.eval_points, replace=False))
    eval_sampler = SamplerConfig(sampler.K, sampler.alpha, sampler.seed)

    report = TrainReport()
    best = (math.inf, dict(params), adam)
    stale = 0
    t0 = time.perf_counter()
    window_losses: List[float] = []
    it = 0
    for it in range(1, cfg.max_iters + 1):
        batch = sample_training_batch(grid, splits, window, sampler, cfg.B, stats, rng, cfg.augmentation)
        tensors = as_tensors(params, requires_grad=True)
        loss = loss_batch(batch, tensors, model_cfg)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDivergedError(f"loss became {value} at iteration {it}", it, params)
        ad.backward(loss)
        grads = {k: t.grad for k, t in tensors.items()}
        if cfg.clip_norm:
            ad.clip_grad_norm(grads, cfg.clip_norm)
        params, adam = ad.adam_step(params, grads, adam)
        report.losses.append(value)
        window_losses.append(value)

        if it % cfg.eval_every == 0 or it == cfg.max_iters:
            model = TrainedModel(params, model_cfg, stats, window, eval_sampler)
            if valid.size:
                m, _ = evaluate_heldout(model, grid, valid, splits.train_mask)
                vnll, vmae, vrmse = m.nll, m.mae, m.rmse
            else:
                vnll = vmae = vrmse = float(np.mean(window_losses))
            rec = EvalRecord(it, float(np.mean(window_losses)), vnll, vmae, vrmse, time.perf_counter() - t0)
            window_losses = []
            report.records.append(rec)
            logger.info("iter %d loss %.4f valid nll %.4f mae %.4f rmse %.4f (%.1fs)",
                        it, rec.train_loss, vnll, vmae, vrmse, rec.seconds)
            if on_eval is not None:
                on_eval(rec)
            if vnll < best[0]:
                best = (vnll, params, adam)
                report.best_iteration = it
                stale = 0
                if checkpoint_path:
                    save_model(checkpoint_path, TrainedModel(params, model_cfg, stats, window, eval_sampler), adam)
            else:
                stale += 1
                if stale >= cfg.patience:
                    report.stop_reason = "patience"
                    break
    if not report.stop_reason:
        report.stop_reason = "max_iters"
    _, best_params, best_adam = best
    model = TrainedModel(best_params, model_cfg, stats, window, eval_sampler)
    if checkpoint_path and report.best_iteration == 0:
        save_model(checkpoint_path, model, best_adam)
    return model, report


# ---------------------------------------------------------------- persistence


def _words(bits: int) -> np.ndarray:
    # 64-bit payload as four 16-bit words; each is exact in float32
    return np.array([(bits >> (16 * i)) & 0xFFFF for i in range(4)], dtype=np.float32)


def _from_words(a: np.ndarray) -> int:
    return sum(int(w) << (16 * i) for i, w in enumerate(a))


def _float_to_words(v: float) -> np.ndarray:
    return _words(int(np.array(v, dtype=np.float64).view(np.uint64)))


def _words_to_float(a: np.ndarray) -> float:
    return float(np.array(_from_words(a), dtype=np.uint64).view(np.float64))


def _meta(model: TrainedModel) -> Dict[str, np.ndarray]:
    return {
        "meta.sigma_floor": _float_to_words(model.model_cfg.sigma_floor),
        "meta.elev_mean": _float_to_words(model.stats.mean),
        "meta.elev_std": _float_to_words(model.stats.std),
        "meta.window_lambda": _float_to_words(model.window.w_lambda),
        "meta.window_phi": _float_to_words(model.window.w_phi),
        "meta.k": _words(int(model.sampler.K)),
        "meta.alpha": _float_to_words(model.sampler.alpha),
        "meta.seed": _words(int(model.sampler.seed)),
    }


def save_model(path: str, model: TrainedModel, adam: Optional[ad.AdamState] = None) -> None:
    entries = dict(model.params)
    entries.update(_meta(model))
    save_checkpoint(path, entries, adam)


def load_model(path: str) -> Tuple[TrainedModel, Optional[ad.AdamState]]:
    entries, adam = load_checkpoint(path)
    meta = {k: v for k, v in entries.items() if k.startswith("meta.")}
    params = {k: v for k, v in entries.items() if not k.startswith("meta.")}
    cfg = config_from_params(params, _words_to_float(meta["meta.sigma_floor"]))
    stats = ElevationStats(_words_to_float(meta["meta.elev_mean"]), _words_to_float(meta["meta.elev_std"]))
    window = WindowSpec(_words_to_float(meta["meta.window_lambda"]), _words_to_float(meta["meta.window_phi"]))
    sampler = SamplerConfig(_from_words(meta["meta.k"]), _words_to_float(meta["meta.alpha"]),
                            _from_words(meta["meta.seed"]))
    return TrainedModel(params, cfg, stats, window, sampler), adam
