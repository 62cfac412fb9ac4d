"""Command line entry point: synth, train, reconstruct, evaluate, ablate.

Every subcommand writes a plain-text ``key=value`` run manifest before doing
any heavy work. Passing that file back through ``--manifest`` reproduces the
run; explicit flags still win over manifest values, which win over defaults.

Exit codes: 0 success, 2 usage, 3 data, 4 compatibility.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import math
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .ablation import DEFAULT_VALUES, run_ablation
from .baselines import METHODS, pixel_targets
from .checkpoint import CheckpointError, atomic_write_bytes
from .imaging import write_png
from .metrics import MetricsReport, compute_metrics
from .model import EmptyContextError, ModelConfig, predict_pixels
from .raster import (DegenerateDataError, DemGrid, InsufficientDataError, RasterParseError, WindowSpec,
                     holdout_split_spec, load_raster, make_splits, punch_voids, save_raster, synth_terrain)
from .sampling import InsufficientContextError, SamplerConfig
from .training import TrainConfig, TrainingDivergedError, evaluate_heldout, load_model, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_COMPAT = 0, 2, 3, 4
MANIFEST_VERSION = 1

logger = logging.getLogger("sanp")


class DataError(Exception):
    """Input data cannot support the requested run (exit 3)."""


class CompatibilityError(Exception):
    """A checkpoint does not fit the raster or the flags (exit 4)."""


# ---------------------------------------------------------------- manifests


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for block in iter(lambda: fh.read(1 << 20), b""):
                h.update(block)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    return h.hexdigest()


def format_manifest(subcommand: str, config: Dict[str, object], inputs: Dict[str, str]) -> str:
    lines = [f"format_version={MANIFEST_VERSION}", f"tool_version={__version__}", f"subcommand={subcommand}"]
    for key in sorted(config):
        lines.append(f"{key}={_manifest_value(config[key])}")
    for key in sorted(inputs):
        lines.append(f"sha256.{key}={sha256_file(inputs[key])}")
    return "\n".join(lines) + "\n"


def _manifest_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_manifest(path: str) -> Dict[str, str]:
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            out[k] = v
    return out


def write_manifest(path: str, subcommand: str, args: argparse.Namespace, inputs: Dict[str, str]) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("manifest", "func", "command", "verbose")}
    text = format_manifest(subcommand, config, inputs)
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------- argument types


def positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def nonneg_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not v > 0 or math.isnan(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def nonneg_float(s: str) -> float:
    """Non-negative number; ``inf`` allowed (used for the sampling temperature)."""
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or inf, got {s!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {s}")
    return v


def fraction(s: str) -> float:
    v = positive_float(s)
    if v >= 1:
        raise argparse.ArgumentTypeError(f"expected a fraction in (0, 1), got {s}")
    return v


def void_spec(s: str) -> str:
    """``none`` or ``<rect|blob|mixed>:<fraction>``."""
    if s == "none":
        return s
    kind, sep, frac = s.partition(":")
    if not sep or kind not in ("rect", "blob", "mixed"):
        raise argparse.ArgumentTypeError(f"void spec must be 'none' or 'rect|blob|mixed:FRACTION', got {s!r}")
    fraction(frac)
    return s


def bool_flag(s: str) -> bool:
    if s in ("True", "true", "1"):
        return True
    if s in ("False", "false", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {s!r}")


def _value_list(axis: str, text: str) -> List[float]:
    conv = nonneg_float if axis == "alpha" else positive_int
    try:
        vals = [conv(t.strip()) for t in text.split(",") if t.strip()]
    except argparse.ArgumentTypeError as exc:
        raise argparse.ArgumentTypeError(f"--values: {exc}") from None
    if not vals:
        raise argparse.ArgumentTypeError("--values is empty")
    if len(set(vals)) != len(vals):
        raise argparse.ArgumentTypeError("--values contains duplicates")
    return vals


# ---------------------------------------------------------------- parser


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window-km", type=positive_float, default=0.5, help="window side length in km")
    p.add_argument("--k", type=positive_int, default=100, help="context points per target")
    p.add_argument("--alpha-km", type=nonneg_float, default=0.4,
                   help="sampling temperature in km (0 = nearest, inf = uniform)")
    p.add_argument("--dim", type=positive_int, default=512, help="latent dimension D")
    p.add_argument("--hidden", type=positive_int, default=1024, help="MLP hidden width")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--batch", type=positive_int, default=1024, help="targets per iteration")
    p.add_argument("--lr", type=positive_float, default=1e-4, help="Adam learning rate")
    p.add_argument("--iters", type=positive_int, default=20000, help="maximum iterations")
    p.add_argument("--seed", type=nonneg_int, default=0, help="initialisation, batch and context seed")
    p.add_argument("--eval-every", type=positive_int, default=100, help="iterations between validations")
    p.add_argument("--patience", type=positive_int, default=20, help="validations without improvement before stopping")
    p.add_argument("--eval-points", type=positive_int, default=1024, help="validation pixels per evaluation")
    p.add_argument("--clip-norm", type=nonneg_float, default=10.0, help="global gradient-norm clip (0 disables)")
    p.add_argument("--augment", type=bool_flag, default=True, help="rotation/scale augmentation (true/false)")
    p.add_argument("--holdout", type=fraction, default=0.05,
                   help="fraction of observed pixels held out (split evenly into validation and test)")
    p.add_argument("--splits-seed", type=nonneg_int, default=0, help="seed of the held-out split")
    p.add_argument("--memory-budget-mb", type=positive_float, default=None,
                   help="refuse configurations whose activation estimate exceeds this")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sanp", description="Neural-process void filling for elevation rasters.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug detail to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a fractal test raster and a voided copy")
    p.add_argument("--size", type=positive_int, default=256, help="raster side in pixels (>= 64)")
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--roughness", type=nonneg_float, default=0.6, help="amplitude ratio between scales")
    p.add_argument("--cell-size", type=positive_float, default=5.0, help="metres per pixel")
    p.add_argument("--void-spec", type=void_spec, default="mixed:0.05", help="none or KIND:FRACTION")
    p.add_argument("--format", choices=("ascii-grid", "sanp-binary"), default="ascii-grid")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on the observed pixels of a raster")
    p.add_argument("--dem", required=True, help="input raster")
    p.add_argument("--out", required=True, help="checkpoint path")
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="fill the voids of a raster with a trained model")
    p.add_argument("--dem", required=True, help="raster with voids")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out-mean", required=True, help="filled raster (metres)")
    p.add_argument("--out-std", required=True, help="predictive standard deviation raster (metres)")
    p.add_argument("--png", default=None, help="prefix for greyscale PNG renderings")
    p.add_argument("--k", type=positive_int, default=None, help="must match the checkpoint if given")
    p.add_argument("--dim", type=positive_int, default=None, help="must match the checkpoint if given")
    p.add_argument("--window-km", type=positive_float, default=None, help="must match the checkpoint if given")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score a prediction source on held-out pixels")
    p.add_argument("--dem", required=True, help="ground-truth raster")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--method", choices=sorted(METHODS))
    src.add_argument("--pred-raster")
    p.add_argument("--voided", default=None,
                   help="score at pixels void here but observed in --dem instead of a random split")
    p.add_argument("--holdout", type=fraction, default=0.05)
    p.add_argument("--splits-seed", type=nonneg_int, default=0)
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="sweep one hyperparameter and tabulate metrics")
    p.add_argument("--dem", required=True)
    p.add_argument("--axis", choices=("k", "alpha", "dim"), required=True)
    p.add_argument("--values", default=None, help="comma-separated values (alpha in km, inf allowed)")
    p.add_argument("--out", required=True, help="CSV path; the summary goes next to it")
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_manifest(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Turn manifest entries into subparser defaults so flags still override them."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--manifest")
    known, rest = pre.parse_known_args(argv)
    if not known.manifest:
        return
    try:
        entries = read_manifest(known.manifest)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read manifest: {exc}")
    command = entries.get("subcommand")
    if command not in ("synth", "train", "reconstruct", "evaluate", "ablate"):
        parser.error(f"manifest {known.manifest} names no known subcommand")
    if command not in rest:
        parser.error(f"manifest is for '{command}'")
    sp = _subparser(parser, command)
    defaults = {}
    for action in sp._actions:
        if action.dest not in entries or not action.option_strings or action.dest == "help":
            continue
        raw = entries[action.dest]
        if raw == "":
            value = None
        elif action.type is not None:
            try:
                value = action.type(raw)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                parser.error(f"manifest entry {action.dest}: {exc}")
        else:
            value = raw
        if action.choices is not None and value is not None and value not in action.choices:
            parser.error(f"manifest entry {action.dest}: invalid choice {value!r}")
        defaults[action.dest] = value
        # a value from the manifest satisfies a required flag
        action.required = False
    sp.set_defaults(**defaults)
    for group in sp._mutually_exclusive_groups:
        if any(a.dest in defaults and defaults[a.dest] is not None for a in group._group_actions):
            group.required = False


# ---------------------------------------------------------------- helpers


def _load(path: str) -> DemGrid:
    try:
        return load_raster(path)
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except (RasterParseError, DegenerateDataError) as exc:
        raise DataError(str(exc)) from None


def _manifest_path(out: str) -> str:
    return out + ".manifest"


def _make_configs(args) -> Tuple[WindowSpec, SamplerConfig, ModelConfig, TrainConfig]:
    w = args.window_km * 1000.0
    window = WindowSpec(w, w)
    sampler = SamplerConfig(args.k, args.alpha_km * 1000.0, args.seed)
    model_cfg = ModelConfig(D=args.dim, hidden=args.hidden)
    train_cfg = TrainConfig(B=args.batch, max_iters=args.iters, eval_every=args.eval_every, patience=args.patience,
                            seed=args.seed, lr=args.lr, augmentation=args.augment, clip_norm=args.clip_norm,
                            eval_points=args.eval_points, memory_budget_mb=args.memory_budget_mb)
    return window, sampler, model_cfg, train_cfg


def _training_setup(args):
    grid = _load(args.dem)
    window, sampler, model_cfg, train_cfg = _make_configs(args)
    try:
        window.validate(grid.cell_size)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if model_cfg.D % model_cfg.heads_enc or model_cfg.D % model_cfg.heads_dec:
        raise argparse.ArgumentTypeError(f"--dim must be divisible by the head count")
    try:
        splits = make_splits(grid, holdout_split_spec(grid, args.holdout, args.splits_seed))
    except InsufficientDataError as exc:
        raise DataError(str(exc)) from None
    n_train = int(splits.train_mask.sum())
    if n_train <= args.k:
        raise DataError(f"only {n_train} training pixels; need more than K={args.k}")
    return grid, splits, window, sampler, model_cfg, train_cfg


# ---------------------------------------------------------------- subcommands


def cmd_synth(args) -> int:
    if args.size < 64:
        raise argparse.ArgumentTypeError("--size must be at least 64")
    os.makedirs(args.out, exist_ok=True)
    ext = ".sdem" if args.format == "sanp-binary" else ".asc"
    write_manifest(os.path.join(args.out, "manifest.txt"), "synth", args, {})
    truth = synth_terrain(args.size, args.seed, args.roughness, args.cell_size)
    if args.void_spec == "none":
        voided = truth
    else:
        kind, frac = args.void_spec.split(":")
        voided = punch_voids(truth, float(frac), args.seed, kind)
    save_raster(truth, os.path.join(args.out, "truth" + ext), args.format)
    save_raster(voided, os.path.join(args.out, "voided" + ext), args.format)
    n_void = int(voided.nodata_mask.sum())
    print(f"wrote {args.out}: {args.size}x{args.size} px, {n_void} void pixels "
          f"({n_void / voided.nodata_mask.size:.2%})")
    return EXIT_OK


def cmd_train(args) -> int:
    write_manifest(_manifest_path(args.out), "train", args, {"dem": args.dem})
    grid, splits, window, sampler, model_cfg, train_cfg = _training_setup(args)

    def progress(rec):
        print(f"iter {rec.iteration} loss {rec.train_loss:.4f} valid_nll {rec.valid_nll:.4f} "
              f"valid_mae {rec.valid_mae:.4f} valid_rmse {rec.valid_rmse:.4f} t {rec.seconds:.1f}s", flush=True)

    model, report = train(grid, splits, window, sampler, model_cfg, train_cfg, on_eval=progress,
                          checkpoint_path=args.out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("iteration", "train_loss", "valid_nll", "valid_mae", "valid_rmse"))
    for r in report.records:
        w.writerow((r.iteration, f"{r.train_loss:.6g}", f"{r.valid_nll:.6g}", f"{r.valid_mae:.6g}",
                    f"{r.valid_rmse:.6g}"))
    atomic_write_bytes(args.out + ".report.csv", buf.getvalue().encode())
    print(f"stopped ({report.stop_reason}); best validation NLL at iteration {report.best_iteration}; "
          f"checkpoint {args.out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    write_manifest(_manifest_path(args.out_mean), "reconstruct", args,
                   {"dem": args.dem, "checkpoint": args.checkpoint})
    grid = _load(args.dem)
    try:
        model, _ = load_model(args.checkpoint)
    except FileNotFoundError:
        raise CompatibilityError(f"{args.checkpoint}: no such file") from None
    except (CheckpointError, KeyError, ValueError) as exc:
        raise CompatibilityError(f"{args.checkpoint}: {exc}") from None
    if args.k is not None and args.k != model.sampler.K:
        raise CompatibilityError(f"--k {args.k} but the checkpoint was trained with K={model.sampler.K}")
    if args.dim is not None and args.dim != model.model_cfg.D:
        raise CompatibilityError(f"--dim {args.dim} but the checkpoint has D={model.model_cfg.D}")
    if args.window_km is not None and not math.isclose(args.window_km * 1000.0, model.window.w_lambda):
        raise CompatibilityError(f"--window-km {args.window_km} but the checkpoint window is "
                                 f"{model.window.w_lambda / 1000:g} km")
    try:
        model.window.validate(grid.cell_size)
    except ValueError as exc:
        raise CompatibilityError(f"checkpoint window does not fit this raster: {exc}") from None

    voids = np.flatnonzero(grid.nodata_mask.reshape(-1))
    mean = grid.elevations.copy()
    std = np.zeros(grid.shape, dtype=np.float32)
    out_mask = grid.nodata_mask.copy()
    if voids.size:
        if not grid.observed.any():
            raise DataError("raster has no observed pixels to condition on")
        rows, cols = np.divmod(voids, grid.ncols)
        pred = predict_pixels(grid, rows, cols, grid.observed, model.window, model.sampler, model.params,
                              model.model_cfg, model.stats)
        ok = pred.ok
        mean.reshape(-1)[voids[ok]] = pred.mu[ok]
        std.reshape(-1)[voids[ok]] = pred.sigma[ok]
        out_mask.reshape(-1)[voids[ok]] = False
        if not ok.all():
            print(f"warning: {int((~ok).sum())} void pixels have no observation in their window "
                  "and stay void", file=sys.stderr)
    mean_grid = DemGrid(mean, out_mask, grid.cell_size, grid.origin)
    std_grid = DemGrid(std, out_mask, grid.cell_size, grid.origin)
    save_raster(mean_grid, args.out_mean)
    save_raster(std_grid, args.out_std)
    if args.png:
        write_png(mean_grid, args.png + "_mean.png")
        write_png(std_grid, args.png + "_std.png")
    print(f"filled {int(voids.size - out_mask.sum())} of {voids.size} void pixels")
    return EXIT_OK


def _write_metrics(path: str, source: str, report: MetricsReport) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("source", "nll", "mae", "rmse", "n_points"))
    row = report.as_row()
    w.writerow((source, row["nll"], row["mae"], row["rmse"], row["n_points"]))
    atomic_write_bytes(path, buf.getvalue().encode())


def cmd_evaluate(args) -> int:
    inputs = {"dem": args.dem}
    for key in ("checkpoint", "pred_raster", "voided"):
        if getattr(args, key):
            inputs[key] = getattr(args, key)
    write_manifest(_manifest_path(args.out), "evaluate", args, inputs)
    truth = _load(args.dem)
    if args.voided:
        voided = _load(args.voided)
        if voided.shape != truth.shape:
            raise DataError(f"--voided is {voided.shape}, --dem is {truth.shape}")
        heldout = np.flatnonzero((voided.nodata_mask & truth.observed).reshape(-1))
        usable = voided.observed & truth.observed
        if heldout.size == 0:
            raise DataError("no pixel is void in --voided and observed in --dem")
    else:
        try:
            splits = make_splits(truth, holdout_split_spec(truth, args.holdout, args.splits_seed))
        except InsufficientDataError as exc:
            raise DataError(str(exc)) from None
        heldout, usable = splits.test, splits.train_mask
        if heldout.size == 0:
            raise DataError("held-out set is empty; raise --holdout")
    values = truth.elevations.reshape(-1)[heldout]

    if args.checkpoint:
        try:
            model, _ = load_model(args.checkpoint)
            model.window.validate(truth.cell_size)
        except FileNotFoundError:
            raise CompatibilityError(f"{args.checkpoint}: no such file") from None
        except (CheckpointError, KeyError, ValueError) as exc:
            raise CompatibilityError(f"{args.checkpoint}: {exc}") from None
        report, pred = evaluate_heldout(model, truth, heldout, usable)
        source = "checkpoint"
        if not pred.ok.all():
            print(f"warning: {int((~pred.ok).sum())} held-out pixels had no context and were skipped",
                  file=sys.stderr)
    elif args.method:
        if not usable.any():
            raise DataError("no observed pixels to interpolate from")
        mu = METHODS[args.method](truth, pixel_targets(truth, heldout), usable)
        report = compute_metrics(mu, values)
        source = args.method
    else:
        pred = _load(args.pred_raster)
        if pred.shape != truth.shape:
            raise DataError(f"--pred-raster is {pred.shape}, --dem is {truth.shape}")
        missing = pred.nodata_mask.reshape(-1)[heldout]
        if missing.any():
            raise DataError(f"--pred-raster has no value at {int(missing.sum())} held-out pixels")
        report = compute_metrics(pred.elevations.reshape(-1)[heldout], values)
        source = "pred-raster"
    _write_metrics(args.out, source, report)
    nll = "n/a" if report.nll is None else f"{report.nll:.4f}"
    print(f"{source}: NLL {nll}  MAE {report.mae:.4f} m  RMSE {report.rmse:.4f} m  on {report.n_points} pixels")
    return EXIT_OK


_AXIS = {"k": ("K", 1.0), "alpha": ("alpha", 1000.0), "dim": ("D", 1.0)}


def cmd_ablate(args) -> int:
    axis, scale = _AXIS[args.axis]
    values = _value_list(args.axis, args.values) if args.values else list(DEFAULT_VALUES[axis])
    args.values = ",".join("inf" if math.isinf(v) else f"{v:g}" for v in values)
    write_manifest(_manifest_path(args.out), "ablate", args, {"dem": args.dem})
    grid, splits, window, sampler, model_cfg, train_cfg = _training_setup(args)
    result = run_ablation(grid, splits, window, sampler, model_cfg, train_cfg, axis, values, scale=scale)
    atomic_write_bytes(args.out, result.to_csv().encode())
    summary = result.summary()
    atomic_write_bytes(os.path.splitext(args.out)[0] + ".summary.txt", summary.encode())
    print(summary, end="")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_manifest(parser, argv)
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--manifest")
        _, rest = pre.parse_known_args(argv)
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        print(f"sanp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InsufficientDataError, InsufficientContextError, EmptyContextError,
            TrainingDivergedError) as exc:
        print(f"sanp {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CompatibilityError as exc:
        print(f"sanp {args.command}: incompatible: {exc}", file=sys.stderr)
        return EXIT_COMPAT


if __name__ == "__main__":
    sys.exit(main())
