"""Command-line driver for the full reconstruction experiment.

Subcommands communicate only through files under the run directory::

    gen            samples.csv, truth.bin, gen.json
    bspline-grid   bspline/{table.csv, recon.bin, error.bin, cross_section.csv,
                   heatmap.pgm, result.json}
    inr-fit        inr-<mode>/{model.ckpt, recon.bin, error.bin,
                   cross_section.csv, result.json, ...}
    render         <grid>.pgm plus a .pgm.json sidecar
    report         summary.json

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
runtime or numerical failures.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bspline import BSplineRegressor, SplineConfig, oracle_grid_search
from .core import (
    RNG_NAME,
    EvalGrid,
    derive_seed,
    eval_grid_coords,
    gen_samples,
    nrmse,
    read_grid,
    read_samples_csv,
    rect2d,
    split_samples,
    write_cross_section,
    write_grid,
    write_samples_csv,
)
from .hyperopt import (
    HYPER_NAMES,
    SearchRecord,
    bilevel_optimize,
    check_bounds,
    score_grid,
)
from .inr import InrRegressor, save_checkpoint, training_mse

logger = logging.getLogger("contfit")

TARGETS = {"rect2d": rect2d}

DEFAULTS = {
    "target": "rect2d",
    "n_samples": 10000,
    "seed": 7,
    "split": {"fraction": 0.8},
    "eval_grid": {"x_min": -0.3, "x_max": 3.3, "y_min": -0.3, "y_max": 3.3,
                  "n_x": 501, "n_y": 501},
    "cross_section_y": 1.5,
    "bspline": {
        "lambdas": {"log10_lo": -5.0, "log10_hi": 5.0, "step": 0.1},
        "ms": {"start": 5, "stop": 100, "step": 5},
    },
    "inr": {
        "levels": 8, "features_per_level": 2, "base_resolution": 4, "scale": 2.0,
        "table_size_log2": 15, "hidden": [32, 32], "lambda_enc": 7.94e-3,
        "lambda_mlp": 1e-6, "learning_rate": 3e-3, "iterations": 2000,
        "init_scale": 1e-4, "adam": [0.9, 0.999, 1e-8], "lr_final_ratio": 1.0,
    },
    "weight_decay_grid": {
        "lambda_enc": {"log10_lo": -4.0, "log10_hi": -1.0, "step": 0.1},
        "lambda_mlp": {"log10_lo": -9.0, "log10_hi": -6.0, "step": 0.1},
    },
    "bilevel": {
        "budget": 60, "lower_iterations": 2000, "n_initial": 12,
        "bounds": {k: list(v) for k, v in check_bounds(None).items()},
    },
    "output_dir": "run",
}

# values that may be either a ladder dict or an explicit list
_LADDERS = {"lambdas", "ms", "lambda_enc", "lambda_mlp"}

MODES = {
    "fixed": "inr-fixed",
    "unregularized": "inr-unregularized",
    "bilevel": "inr-bilevel",
    "grid-oracle100": "inr-oracle100",
    "grid-oracle80": "inr-oracle80",
    "grid-validation": "inr-val-grid",
}

REPORT_ENTRIES = {
    "bspline-oracle": "bspline",
    "inr-oracle100": "inr-oracle100",
    "inr-oracle80": "inr-oracle80",
    "inr-val-grid": "inr-val-grid",
    "inr-bilevel": "inr-bilevel",
    "inr-unregularized": "inr-unregularized",
}
LADDER_TOL = 0.005


class ConfigError(ValueError):
    pass


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path}{k!r}")
        if isinstance(base[k], dict) and k not in _LADDERS:
            if not isinstance(v, dict):
                raise ConfigError(f"config key {path}{k!r} must be an object")
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


def _load_with_includes(path: Path, seen=()) -> dict:
    path = Path(path).resolve()
    if path in seen:
        raise ConfigError(f"include cycle at {path}")
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    inc = doc.pop("include", [])
    merged = copy.deepcopy(DEFAULTS)
    for p in [inc] if isinstance(inc, str) else inc:
        merged = _merge(merged, _load_with_includes(path.parent / p, seen + (path,)))
    return _merge(merged, doc)


def _ladder(spec, name: str, integer: bool = False) -> list:
    if isinstance(spec, list):
        vals = spec
    elif isinstance(spec, dict):
        if integer:
            keys = {"start", "stop", "step"}
            if set(spec) != keys:
                raise ConfigError(f"{name} ladder needs keys {sorted(keys)}")
            if spec["step"] <= 0:
                raise ConfigError(f"{name} ladder step must be positive")
            vals = list(range(spec["start"], spec["stop"] + 1, spec["step"]))
        else:
            keys = {"log10_lo", "log10_hi", "step"}
            if set(spec) != keys:
                raise ConfigError(f"{name} ladder needs keys {sorted(keys)}")
            if spec["step"] <= 0 or spec["log10_hi"] < spec["log10_lo"]:
                raise ConfigError(f"{name} ladder is empty")
            n = int(round((spec["log10_hi"] - spec["log10_lo"]) / spec["step"])) + 1
            vals = list(10.0 ** np.linspace(spec["log10_lo"], spec["log10_hi"], n))
    else:
        raise ConfigError(f"{name} must be a list or a ladder object")
    if not vals:
        raise ConfigError(f"{name} is empty")
    try:
        vals = [int(v) if integer else float(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} has non-numeric entries") from None
    if any(v < 0 for v in vals):
        raise ConfigError(f"{name} has negative entries")
    return vals


@dataclass
class ExperimentConfig:
    """Resolved experiment settings; ``data`` mirrors the JSON document."""

    data: dict

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, doc: Optional[dict] = None) -> "ExperimentConfig":
        doc = dict(doc or {})
        if "include" in doc:
            raise ConfigError("'include' is only allowed in config files")
        return cls(_merge(DEFAULTS, doc))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls(_load_with_includes(Path(path)))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def replace(self, **changes) -> "ExperimentConfig":
        return ExperimentConfig(_merge(self.data, changes))

    def validate(self) -> None:
        d = self.data
        if d["target"] not in TARGETS:
            raise ConfigError(f"unknown target {d['target']!r}; choose from {sorted(TARGETS)}")
        if not isinstance(d["n_samples"], int) or d["n_samples"] < 1:
            raise ConfigError("n_samples must be a positive integer")
        if not isinstance(d["seed"], int) or not 0 <= d["seed"] < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not 0.0 < d["split"]["fraction"] < 1.0:
            raise ConfigError("split.fraction must lie in (0, 1)")
        try:
            self.eval_grid(with_truth=False)
            [SplineConfig(m) for m in self.ms()]
            est = self.estimator()
            est.encoder_config()
            est.train_config()
            self.bounds()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        self.lambdas()
        self.enc_grid()
        self.mlp_grid()
        b = d["bilevel"]
        if not isinstance(b["budget"], int) or not isinstance(b["n_initial"], int) \
                or not 1 <= b["n_initial"] <= b["budget"]:
            raise ConfigError("bilevel needs integers 1 <= n_initial <= budget")
        if not isinstance(b["lower_iterations"], int) or b["lower_iterations"] < 1:
            raise ConfigError("bilevel.lower_iterations must be a positive integer")

    # --- derived seeds -----------------------------------------------------
    # one master seed; each consumer draws from its own child stream

    def seeds(self) -> dict:
        s = self.data["seed"]
        return {"samples": s, "split": derive_seed(s, 1), "train": derive_seed(s, 2),
                "grid": derive_seed(s, 3), "bilevel": derive_seed(s, 4)}

    # --- typed views -------------------------------------------------------

    def target(self):
        return TARGETS[self.data["target"]]

    def eval_grid(self, with_truth: bool = True) -> EvalGrid:
        g = EvalGrid(**self.data["eval_grid"])
        return g.with_truth(self.target()) if with_truth else g

    def lambdas(self) -> list:
        return _ladder(self.data["bspline"]["lambdas"], "bspline.lambdas")

    def ms(self) -> list:
        return _ladder(self.data["bspline"]["ms"], "bspline.ms", integer=True)

    def enc_grid(self) -> list:
        return _ladder(self.data["weight_decay_grid"]["lambda_enc"], "weight_decay_grid.lambda_enc")

    def mlp_grid(self) -> list:
        return _ladder(self.data["weight_decay_grid"]["lambda_mlp"], "weight_decay_grid.lambda_mlp")

    def bounds(self) -> dict:
        return check_bounds({k: tuple(v) for k, v in self.data["bilevel"]["bounds"].items()})

    def estimator(self, **overrides) -> InrRegressor:
        p = dict(self.data["inr"])
        p["hidden"] = tuple(p["hidden"])
        p["adam"] = tuple(p["adam"])
        p["seed"] = self.seeds()["train"]
        p.update(overrides)
        return InrRegressor(**p)


# ---------------------------------------------------------------------------
# file helpers


def _write_json(path: Path, obj) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    tmp.replace(path)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _metadata(cfg: ExperimentConfig, **extra) -> dict:
    meta = {"config": cfg.to_dict(), "seeds": cfg.seeds(), "rng": RNG_NAME,
            "version": __version__}
    meta.update(extra)
    return meta


def _load_inputs(out: Path, cfg: ExperimentConfig):
    sp, tp = out / "samples.csv", out / "truth.bin"
    missing = [str(p) for p in (sp, tp) if not p.exists()]
    if missing:
        raise FileNotFoundError(f"missing inputs (run `gen` first): {', '.join(missing)}")
    samples = read_samples_csv(sp)
    g, truth, _ = read_grid(tp)
    return samples, EvalGrid(g.x_min, g.x_max, g.y_min, g.y_max, g.n_x, g.n_y, truth)


def _emit_reconstruction(d: Path, cfg: ExperimentConfig, grid: EvalGrid, recon, meta: dict) -> float:
    err = np.abs(recon - grid.truth)
    score = nrmse(recon, grid.truth)
    write_grid(d / "recon.bin", grid, recon, meta=meta)
    write_grid(d / "error.bin", grid, err, meta=dict(meta, kind="absolute error"))
    row = write_cross_section(d / "cross_section.csv", grid, recon, cfg.data["cross_section_y"],
                              truth=grid.truth)
    _write_json(d / "cross_section.csv.json", dict(meta, row=row, y=float(grid.ys()[row])))
    return score


def write_pgm(path, image, symmetric: Optional[bool] = None, meta: Optional[dict] = None) -> dict:
    """Write a 2-D array as a plain (ASCII) 16-bit PGM with a JSON sidecar.

    Gray level is ``round(65535 * (v - lo) / (hi - lo))`` with ``lo, hi`` the
    finite min and max, or ``-a, a`` with ``a = max |v|`` for symmetric
    mapping (the default when the data has both signs). Row 0 of ``image``
    is the bottom row of the picture. Non-finite values map to 0. A constant
    image maps to 0 everywhere.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"image must be a nonempty 2-D array, got shape {img.shape}")
    finite = np.isfinite(img)
    vals = img[finite]
    lo, hi = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 0.0)
    if symmetric is None:
        symmetric = lo < 0.0 < hi
    if symmetric:
        a = max(abs(lo), abs(hi))
        lo, hi = -a, a
    span = hi - lo
    if span > 0:
        gray = np.rint(np.clip((img - lo) / span, 0.0, 1.0) * 65535.0)
    else:
        gray = np.zeros_like(img)
    gray = np.where(finite, gray, 0.0).astype(np.int64)[::-1]
    h, w = gray.shape
    lines = ["P2", f"{w} {h}", "65535"]
    lines += [" ".join(map(str, r)) for r in gray]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    side = {"min": lo, "max": hi, "symmetric": bool(symmetric), "maxval": 65535,
            "mapping": "gray = round(65535 * (v - min) / (max - min)); row 0 at bottom",
            "nonfinite": int(img.size - vals.size), "width": w, "height": h}
    if meta:
        side["meta"] = meta
    _write_json(path.with_name(path.name + ".json"), side)
    return side


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(cfg: ExperimentConfig, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    seeds = cfg.seeds()
    s = gen_samples(cfg.data["n_samples"], seeds["samples"], cfg.target())
    grid = cfg.eval_grid()
    meta = _metadata(cfg)
    write_samples_csv(out / "samples.csv", s)
    write_grid(out / "truth.bin", grid, grid.truth, meta=meta)
    info = dict(meta, n_samples=len(s), grid=grid.meta())
    _write_json(out / "gen.json", info)
    return info


def cmd_bspline_grid(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    samples, grid = _load_inputs(out, cfg)
    d = out / "bspline"
    d.mkdir(exist_ok=True)
    t0 = time.time()
    res = oracle_grid_search(samples, grid, cfg.lambdas(), cfg.ms(), workers=workers)
    elapsed = time.time() - t0
    res.write_csv(d / "table.csv")
    meta = _metadata(cfg, best_m=res.best_m, best_lambda=res.best_lambda)
    _write_json(d / "table.csv.json", meta)
    write_pgm(d / "heatmap.pgm", res.table, meta=dict(meta, rows="m", cols="lambda"))
    est = BSplineRegressor(n_knots=res.best_m, alpha=res.best_lambda)
    est.fit(samples.coords, samples.values)
    recon = est.predict(eval_grid_coords(grid))
    score = _emit_reconstruction(d, cfg, grid, recon, meta)
    result = dict(meta, nrmse=score, grid_nrmse=res.best_nrmse, wall_time=elapsed,
                  n_cells=int(res.table.size), singular_cells=int(np.isnan(res.table).sum()))
    _write_json(d / "result.json", result)
    return result


def _fit_and_emit(d: Path, cfg: ExperimentConfig, samples, grid, est: InrRegressor,
                  extra: dict) -> dict:
    t0 = time.time()
    est.fit(samples.coords, samples.values)
    fit_time = time.time() - t0
    return _emit_inr(d, cfg, samples, grid, est, dict(extra, refit_time=fit_time))


def _emit_inr(d: Path, cfg, samples, grid, est: InrRegressor, extra: dict) -> dict:
    beta = {"lambda_enc": est.lambda_enc, "lambda_mlp": est.lambda_mlp,
            "learning_rate": est.learning_rate, "scale": est.scale}
    meta = _metadata(cfg, beta=beta, train_seed=est.seed)
    save_checkpoint(d / "model.ckpt", est.model_, extra=meta)
    recon = est.predict(eval_grid_coords(grid))
    score = _emit_reconstruction(d, cfg, grid, recon, meta)
    np.savetxt(d / "loss_trace.csv", est.loss_trace_, header="loss", comments="", fmt="%.17e")
    result = dict(meta, nrmse=score, training_mse=training_mse(est.model_, samples),
                  loss_trace=[float(v) for v in est.loss_trace_])
    result.update(extra)
    _write_json(d / "result.json", result)
    return result


def cmd_inr_fit(cfg: ExperimentConfig, out: Path, mode: str, workers: int = 1,
                resume: bool = False) -> dict:
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}; choose from {sorted(MODES)}")
    samples, grid = _load_inputs(out, cfg)
    seeds = cfg.seeds()
    d = out / MODES[mode]
    d.mkdir(exist_ok=True)
    t0 = time.time()

    if mode in ("fixed", "unregularized"):
        over = {"lambda_enc": 0.0, "lambda_mlp": 0.0} if mode == "unregularized" else {}
        res = _fit_and_emit(d, cfg, samples, grid, cfg.estimator(**over), {"mode": mode})

    elif mode == "bilevel":
        split = split_samples(samples, cfg.data["split"]["fraction"], seeds["split"])
        b = cfg.data["bilevel"]
        hist_path = d / "history.jsonl"
        prior = []
        if resume and hist_path.exists():
            prior = [SearchRecord.from_json(l) for l in hist_path.read_text().splitlines() if l]
        elif hist_path.exists():
            hist_path.unlink()
        br = bilevel_optimize(split, cfg.estimator(), cfg.bounds(), b["budget"],
                              b["lower_iterations"], seeds["bilevel"], b["n_initial"],
                              refit=True, history_path=hist_path, resume_history=prior)
        search_time = time.time() - t0
        res = _emit_inr(d, cfg, samples, grid, br.estimator, {
            "mode": mode, "best_hyper": {k: getattr(br.best, k) for k in HYPER_NAMES},
            "validation_loss": br.best_objective, "n_evaluations": len(br.history),
            "search_time": search_time})

    else:
        crit = {"grid-oracle100": "oracle-100", "grid-oracle80": "oracle-80",
                "grid-validation": "validation"}[mode]
        split = samples
        if crit != "oracle-100":
            split = split_samples(samples, cfg.data["split"]["fraction"], seeds["split"])
        est = cfg.estimator()
        gr = score_grid(split, est, cfg.enc_grid(), cfg.mlp_grid(), [crit],
                        grid if crit != "validation" else None, seeds["grid"], workers,
                        cell_dir=d / "cells", resume=resume)[crit]
        search_time = time.time() - t0
        gr.write_csv(d / "grid.csv")
        a = int(np.flatnonzero(np.asarray(gr.enc_grid) == gr.best_lambda_enc)[0])
        c = int(np.flatnonzero(np.asarray(gr.mlp_grid) == gr.best_lambda_mlp)[0])
        best = est.set_params(lambda_enc=gr.best_lambda_enc, lambda_mlp=gr.best_lambda_mlp,
                              seed=int(gr.seeds[a, c]))
        extra = {"mode": mode, "criterion": crit, "grid_objective": gr.best_objective,
                 "search_time": search_time}
        res = _fit_and_emit(d, cfg, samples, grid, best, extra)
    return res


def cmd_render(grid_file: Path, out: Optional[Path] = None) -> dict:
    g, values, meta = read_grid(grid_file)
    path = Path(out) if out is not None else Path(grid_file).with_suffix(".pgm")
    if path.is_dir():
        path = path / (Path(grid_file).stem + ".pgm")
    side = write_pgm(path, values.reshape(g.n_y, g.n_x), meta={"source": str(grid_file)})
    return dict(side, path=str(path))


def cmd_report(run_dir: Path) -> dict:
    run_dir = Path(run_dir)
    missing = [str(run_dir / sub / "result.json") for sub in REPORT_ENTRIES.values()
               if not (run_dir / sub / "result.json").exists()]
    if missing:
        raise FileNotFoundError("incomplete run directory, missing:\n  " + "\n  ".join(missing))
    scores, hypers, timings = {}, {}, {}
    for name, sub in REPORT_ENTRIES.items():
        r = json.loads((run_dir / sub / "result.json").read_text())
        scores[name] = r["nrmse"]
        if name == "bspline-oracle":
            hypers[name] = {"m": r["best_m"], "lambda": r["best_lambda"]}
        else:
            hypers[name] = r["beta"]
        timings[name] = {k: r[k] for k in ("wall_time", "search_time", "refit_time") if k in r}

    def le(a, b):
        return {"lhs": a, "rhs": b, "holds": scores[a] <= scores[b] + LADDER_TOL}

    checks = [le("inr-oracle100", "inr-bilevel"), le("inr-bilevel", "inr-val-grid")]
    checks += [le(k, "bspline-oracle") for k in ("inr-oracle100", "inr-bilevel", "inr-val-grid")]
    checks.append(le("bspline-oracle", "inr-unregularized"))
    summary = {"nrmse": scores, "hyperparameters": hypers, "timings": timings,
               "ordering": {"tolerance": LADDER_TOL, "checks": checks,
                            "holds": all(c["holds"] for c in checks)}}
    _write_json(run_dir / "summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--out", type=Path, help="run directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="parallel fits (default: available cores)")
    common.add_argument("--resume", action="store_true",
                        help="reuse finished grid cells / bilevel evaluations")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="contfit", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gen", parents=[common], help="draw samples and the truth grid")
    sub.add_parser("bspline-grid", parents=[common], help="oracle (M, lambda) B-spline search")
    fit = sub.add_parser("inr-fit", parents=[common], help="fit the hash-encoded INR")
    fit.add_argument("--mode", choices=sorted(MODES), default="fixed")
    r = sub.add_parser("render", parents=[common], help="grid file to 16-bit PGM")
    r.add_argument("grid_file", type=Path)
    rep = sub.add_parser("report", parents=[common], help="summarize a run directory")
    rep.add_argument("run_dir", type=Path, nargs="?")
    return p


def _resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.from_dict()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"contfit: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        cfg = _resolve_config(args)
        out = args.out if args.out is not None else Path(cfg.data["output_dir"])
        if args.command == "gen":
            res = cmd_gen(cfg, out)
            msg = f"wrote {res['n_samples']} samples to {out}"
        elif args.command == "bspline-grid":
            res = cmd_bspline_grid(cfg, out, args.workers)
            msg = f"B-spline oracle NRMSE {res['nrmse']:.4f} (M={res['best_m']}, lambda={res['best_lambda']:.3g})"
        elif args.command == "inr-fit":
            res = cmd_inr_fit(cfg, out, args.mode, args.workers, args.resume)
            msg = f"INR {args.mode} NRMSE {res['nrmse']:.4f}"
        elif args.command == "render":
            res = cmd_render(args.grid_file, args.out)
            msg = f"wrote {res['path']}"
        else:
            res = cmd_report(args.run_dir if args.run_dir is not None else out)
            msg = json.dumps(res["nrmse"], indent=2, sort_keys=True)
    except (UsageError, ConfigError) as exc:
        print(f"contfit: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # runtime and numerical failures
        logger.debug("failure", exc_info=True)
        print(f"contfit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(msg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
