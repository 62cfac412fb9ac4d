"""Sparse attentive neural processes for filling voids in elevation rasters."""

__version__ = "0.1.0"

from .autodiff import Tensor, backward, grad_check
from .baselines import interp_cubic, interp_linear, interp_nearest
from .metrics import MetricsReport, compute_metrics
from .model import ModelConfig, Prediction, forward, init_params, predict, predict_pixels
from .raster import (DemGrid, ElevationStats, SplitSpec, Splits, WindowSpec, load_raster, make_splits,
                     save_raster, synth_terrain)
from .sampling import AugmentParams, SamplerConfig, augment, sample_context, select_context
from .training import TrainConfig, TrainedModel, load_model, save_model, train

__all__ = [
    "Tensor", "backward", "grad_check",
    "interp_cubic", "interp_linear", "interp_nearest",
    "MetricsReport", "compute_metrics",
    "ModelConfig", "Prediction", "forward", "init_params", "predict", "predict_pixels",
    "DemGrid", "ElevationStats", "SplitSpec", "Splits", "WindowSpec", "load_raster", "make_splits",
    "save_raster", "synth_terrain",
    "AugmentParams", "SamplerConfig", "augment", "sample_context", "select_context",
    "TrainConfig", "TrainedModel", "load_model", "save_model", "train",
]
