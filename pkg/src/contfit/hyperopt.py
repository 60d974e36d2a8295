"""Weight-decay grid searches and bilevel Bayesian optimization for the INR.

The search variable is ``(log10 lambda_enc, log10 lambda_mlp, log10 tau, b)``
inside a box. The lower level trains an ``InrRegressor`` on the training
split; the upper level scores the validation MSE (or, for oracle searches,
the NRMSE against a truth grid).

Bayesian optimization uses a zero-mean Gaussian process with an anisotropic
squared-exponential kernel on the unit box, fitted to standardized
objectives, and expected improvement maximized over 1024 scrambled Sobol
candidates followed by L-BFGS-B refinement of the best four.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize, stats
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.stats import qmc
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_is_fitted, validate_data

from .core import EvalGrid, SampleSet, derive_seed, eval_grid_coords, make_rng, nrmse
from .inr import InrModel, InrRegressor, NonFiniteError, forward

logger = logging.getLogger(__name__)

HYPER_NAMES = ("log10_lambda_enc", "log10_lambda_mlp", "log10_tau", "b")
DEFAULT_BOUNDS = {
    "log10_lambda_enc": (-4.0, -1.0),
    "log10_lambda_mlp": (-9.0, -6.0),
    "log10_tau": (-4.0, -1.0),
    "b": (1.2, 2.0),
}
N_INITIAL = 12
N_CANDIDATES = 1024
N_REFINE = 4
CRITERIA = ("oracle-100", "oracle-80", "validation")


def check_bounds(bounds: Optional[dict]) -> dict:
    bounds = dict(DEFAULT_BOUNDS if bounds is None else bounds)
    if set(bounds) != set(HYPER_NAMES):
        raise ValueError(f"bounds must have exactly the keys {HYPER_NAMES}")
    for k, (lo, hi) in bounds.items():
        if not lo <= hi:
            raise ValueError(f"bound {k} = ({lo}, {hi}) is empty")
    return {k: (float(bounds[k][0]), float(bounds[k][1])) for k in HYPER_NAMES}


@dataclass(frozen=True)
class HyperVector:
    log10_lambda_enc: float
    log10_lambda_mlp: float
    log10_tau: float
    b: float

    @property
    def lambda_enc(self) -> float:
        return 10.0**self.log10_lambda_enc

    @property
    def lambda_mlp(self) -> float:
        return 10.0**self.log10_lambda_mlp

    @property
    def tau(self) -> float:
        return 10.0**self.log10_tau

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in HYPER_NAMES])

    def to_unit(self, bounds: dict) -> np.ndarray:
        lo = np.array([bounds[k][0] for k in HYPER_NAMES])
        hi = np.array([bounds[k][1] for k in HYPER_NAMES])
        span = np.where(hi > lo, hi - lo, 1.0)
        return (self.as_array() - lo) / span

    @classmethod
    def from_unit(cls, u, bounds: dict) -> "HyperVector":
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        vals = [bounds[k][0] + ui * (bounds[k][1] - bounds[k][0])
                for k, ui in zip(HYPER_NAMES, u)]
        return cls(*(float(v) for v in vals))

    def within(self, bounds: dict, tol: float = 1e-12) -> bool:
        return all(bounds[k][0] - tol <= getattr(self, k) <= bounds[k][1] + tol
                   for k in HYPER_NAMES)

    def estimator_params(self) -> dict:
        return {"lambda_enc": self.lambda_enc, "lambda_mlp": self.lambda_mlp,
                "learning_rate": self.tau, "scale": self.b}


@dataclass
class SearchRecord:
    hyper: HyperVector
    objective: float
    wall_time: float
    seed: int
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> str:
        return json.dumps({"hyper": asdict(self.hyper), "objective": self.objective,
                           "status": self.status, "seed": self.seed,
                           "wall_time": self.wall_time}, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "SearchRecord":
        d = json.loads(line)
        return cls(HyperVector(**d["hyper"]), float(d["objective"]),
                   float(d["wall_time"]), int(d["seed"]), d["status"])


def validation_loss(model, val: SampleSet) -> float:
    """Plain mean squared error of ``model`` on ``val`` (no penalty terms).

    ``model`` may be an InrModel, a fitted estimator or any callable on
    coordinates.
    """
    if len(val) < 1:
        raise ValueError("validation set is empty")
    if isinstance(model, InrModel):
        pred = forward(model, val.coords)
    elif hasattr(model, "predict"):
        pred = model.predict(val.coords)
    else:
        pred = model(val.coords)
    r = np.asarray(pred, dtype=np.float64) - val.values
    return float(r @ r) / len(val)


# ---------------------------------------------------------------------------
# grid search over the two weight decays


@dataclass
class GridSearchResult:
    criterion: str
    enc_grid: np.ndarray
    mlp_grid: np.ndarray
    table: np.ndarray
    """Objective with shape ``(len(enc_grid), len(mlp_grid))``; NaN where failed."""
    best_lambda_enc: float
    best_lambda_mlp: float
    best_objective: float
    seeds: np.ndarray

    @property
    def best(self) -> tuple[float, float]:
        return self.best_lambda_enc, self.best_lambda_mlp

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("log10_lambda_enc,log10_lambda_mlp,objective,status\n")
            for a, le in enumerate(self.enc_grid):
                for b, lm in enumerate(self.mlp_grid):
                    v = self.table[a, b]
                    status = "failed" if np.isnan(v) else "ok"
                    fh.write(f"{math.log10(le)!r},{math.log10(lm)!r},"
                             f"{'nan' if np.isnan(v) else repr(float(v))},{status}\n")


def _cell_task(args):
    (estimator, params, train_set, val_set, grid_coords, truth, criteria, cell_file) = args
    t0 = time.time()
    est = clone(estimator).set_params(**params)
    out = {"params": params, "status": "ok", "objectives": {}}
    try:
        est.fit(train_set.coords, train_set.values)
        for crit in criteria:
            if crit == "validation":
                out["objectives"][crit] = validation_loss(est, val_set)
            else:
                out["objectives"][crit] = nrmse(est.predict(grid_coords), truth)
    except NonFiniteError as exc:
        logger.warning("cell %s failed: %s", params, exc)
        out["status"] = "failed"
        out["error"] = str(exc)
    out["wall_time"] = time.time() - t0
    if cell_file is not None:
        tmp = Path(str(cell_file) + ".tmp")
        tmp.write_text(json.dumps(out, sort_keys=True))
        tmp.replace(cell_file)
    return out


def score_grid(samples: SampleSet, estimator: InrRegressor, enc_grid: Sequence[float],
               mlp_grid: Sequence[float], criteria: Sequence[str],
               grid: Optional[EvalGrid] = None, base_seed: int = 0, workers: int = 1,
               cell_dir=None, resume: bool = False) -> dict:
    """Run several criteria over one weight-decay grid.

    ``oracle-80`` and ``validation`` share their training runs (same split,
    same per-cell seed), so asking for both costs one sweep. Cell ``(a, b)``
    uses seed ``derive_seed(base_seed, a * len(mlp_grid) + b)``; oracle-100
    cells reuse that seed on the full sample set. With ``cell_dir`` each
    finished cell is written as JSON, and ``resume`` skips cells already there.
    """
    criteria = list(dict.fromkeys(criteria))
    for c in criteria:
        if c not in CRITERIA:
            raise ValueError(f"unknown criterion {c!r}; choose from {CRITERIA}")
    enc_grid = np.asarray(enc_grid, dtype=np.float64)
    mlp_grid = np.asarray(mlp_grid, dtype=np.float64)
    if enc_grid.size == 0 or mlp_grid.size == 0:
        raise ValueError("weight-decay grids must be nonempty")
    oracle = [c for c in criteria if c.startswith("oracle")]
    if oracle and (grid is None or grid.truth is None):
        raise ValueError(f"criteria {oracle} need a truth-bearing EvalGrid")
    if not oracle and grid is not None:
        raise ValueError("the validation criterion must not be given a truth grid")
    split_crit = [c for c in criteria if c != "oracle-100"]
    if split_crit and not samples.has_split:
        raise ValueError(f"criteria {split_crit} need a train/validation split")

    grid_coords = eval_grid_coords(grid) if oracle else None
    truth = grid.truth if oracle else None
    if cell_dir is not None:
        cell_dir = Path(cell_dir)
        cell_dir.mkdir(parents=True, exist_ok=True)

    tasks, keys = [], []
    results = {}
    seeds = np.zeros((enc_grid.size, mlp_grid.size), dtype=np.uint64)
    for a, le in enumerate(enc_grid):
        for b, lm in enumerate(mlp_grid):
            seed = derive_seed(base_seed, a * mlp_grid.size + b)
            seeds[a, b] = seed
            params = {"lambda_enc": float(le), "lambda_mlp": float(lm), "seed": seed}
            jobs = []
            if "oracle-100" in criteria:
                jobs.append(("full", samples, None, ["oracle-100"]))
            if split_crit:
                jobs.append(("split", samples.train, samples.validation, split_crit))
            for tag, tr, va, crits in jobs:
                f = None
                if cell_dir is not None:
                    f = cell_dir / f"cell_{tag}_{a:03d}_{b:03d}.json"
                    if resume and f.exists():
                        results[(a, b, tag)] = json.loads(f.read_text())
                        continue
                keys.append((a, b, tag))
                tasks.append((estimator, params, tr, va, grid_coords, truth, crits, f))

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as ex:
            outs = list(ex.map(_cell_task, tasks))
    else:
        outs = [_cell_task(t) for t in tasks]
    results.update(zip(keys, outs))

    out = {}
    for crit in criteria:
        tag = "full" if crit == "oracle-100" else "split"
        table = np.full((enc_grid.size, mlp_grid.size), np.nan)
        for a in range(enc_grid.size):
            for b in range(mlp_grid.size):
                r = results[(a, b, tag)]
                if r["status"] == "ok":
                    table[a, b] = r["objectives"][crit]
        out[crit] = _grid_result(crit, enc_grid, mlp_grid, table, seeds)
    return out


def _grid_result(crit, enc_grid, mlp_grid, table, seeds) -> GridSearchResult:
    best_key, best = None, None
    for a, le in enumerate(enc_grid):
        for b, lm in enumerate(mlp_grid):
            v = table[a, b]
            if np.isnan(v):
                continue
            key = (v, le, lm)
            if best_key is None or key < best_key:
                best_key, best = key, (a, b)
    if best is None:
        raise RuntimeError(f"every grid cell failed under criterion {crit}")
    a, b = best
    return GridSearchResult(crit, enc_grid, mlp_grid, table, float(enc_grid[a]),
                            float(mlp_grid[b]), float(table[a, b]), seeds)


def grid_search_inr(samples: SampleSet, estimator: InrRegressor, enc_grid, mlp_grid,
                    criterion: str, grid: Optional[EvalGrid] = None, base_seed: int = 0,
                    workers: int = 1, cell_dir=None, resume: bool = False) -> GridSearchResult:
    """Grid search over ``(lambda_enc, lambda_mlp)`` with the other settings fixed.

    ``criterion`` is ``oracle-100`` (train on all samples, NRMSE on
    ``grid``), ``oracle-80`` (train on the split's training part, NRMSE) or
    ``validation`` (train on the training part, MSE on the validation part;
    ``grid`` must be omitted). Ties go to the smaller ``lambda_enc``, then the
    smaller ``lambda_mlp``.
    """
    return score_grid(samples, estimator, enc_grid, mlp_grid, [criterion], grid,
                      base_seed, workers, cell_dir, resume)[criterion]


def log_ladder(lo: float, hi: float, step: float = 0.1) -> np.ndarray:
    """``10**e`` for exponents ``lo, lo + step, ..., hi`` (inclusive)."""
    n = int(round((hi - lo) / step)) + 1
    return 10.0 ** np.linspace(lo, hi, n)


# ---------------------------------------------------------------------------
# Gaussian-process surrogate


def _se_kernel(xa, xb, signal_var, lengths):
    d = (xa[:, None, :] - xb[None, :, :]) / lengths
    return signal_var * np.exp(-0.5 * np.sum(d * d, axis=-1))


@dataclass
class GpSurrogate:
    """Zero-mean GP on standardized objectives over the unit box.

    ``flat`` marks degenerate data (all objectives equal): the signal
    variance is zero, so the posterior mean is the constant observation. The
    posterior variance reported for such a surrogate uses unit signal
    variance so that exploration still prefers points far from the data.
    """

    x: np.ndarray
    y: np.ndarray
    y_mean: float
    y_std: float
    signal_var: float
    lengths: np.ndarray
    noise_var: float
    jitter: float = 0.0
    flat: bool = False
    _chol: np.ndarray = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        sv = 1.0 if self.flat else self.signal_var
        k = _se_kernel(self.x, self.x, sv, self.lengths)
        n = self.x.shape[0]
        jitter = self.jitter
        while True:
            try:
                L = cholesky(k + (self.noise_var + jitter) * np.eye(n), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = max(1e-10, 10.0 * jitter)
                if jitter > 1.0:
                    raise
        self.jitter = jitter
        self._chol = L
        self._alpha = cho_solve((L, True), self.y) if not self.flat else np.zeros(n)

    def predict(self, xq, return_std: bool = True):
        """Posterior mean and std in standardized units at unit-box points."""
        xq = np.atleast_2d(np.asarray(xq, dtype=np.float64))
        sv = 1.0 if self.flat else self.signal_var
        ks = _se_kernel(xq, self.x, sv, self.lengths)
        mu = ks @ self._alpha
        if not return_std:
            return mu
        v = solve_triangular(self._chol, ks.T, lower=True)
        var = np.maximum(sv - np.sum(v * v, axis=0), 0.0)
        return mu, np.sqrt(var)

    def standardize(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.y_mean) / self.y_std

    @property
    def incumbent(self) -> float:
        """Best observed standardized objective."""
        return float(np.min(self.y))


def _neg_log_marginal(theta, x, y):
    d = x.shape[1]
    sv = math.exp(theta[0])
    lengths = np.exp(theta[1:1 + d])
    noise = math.exp(theta[1 + d])
    k = _se_kernel(x, x, sv, lengths) + (noise + 1e-10) * np.eye(x.shape[0])
    try:
        L = cholesky(k, lower=True)
    except np.linalg.LinAlgError:
        return 1e25
    alpha = cho_solve((L, True), y)
    return float(0.5 * y @ alpha + np.sum(np.log(np.diag(L)))
                 + 0.5 * len(y) * math.log(2 * math.pi))


def gp_fit(records, bounds: Optional[dict] = None, seed: int = 0,
           n_restarts: int = 5) -> GpSurrogate:
    """Fit a GP surrogate to the successful records.

    ``records`` is a list of SearchRecord, or a pair ``(x_unit, y)`` of
    arrays. Kernel hyperparameters maximize the log marginal likelihood from
    several seeded starting points.
    """
    if isinstance(records, tuple):
        x, y = (np.asarray(a, dtype=np.float64) for a in records)
        x = np.atleast_2d(x.T).T if x.ndim == 1 else x
    else:
        bounds = check_bounds(bounds)
        ok = [r for r in records if r.ok and math.isfinite(r.objective)]
        x = np.array([r.hyper.to_unit(bounds) for r in ok]).reshape(len(ok), -1)
        y = np.array([r.objective for r in ok])
    if x.shape[0] < 2:
        raise ValueError("a GP surrogate needs at least 2 successful observations")
    d = x.shape[1]
    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if y_std == 0.0 or not np.isfinite(y_std):
        return GpSurrogate(x, np.zeros_like(y), y_mean, 1.0, 0.0,
                           np.full(d, 0.3), 1e-6, flat=True)
    ys = (y - y_mean) / y_std

    log_b = [(math.log(1e-2), math.log(1e2))] + [(math.log(1e-2), math.log(1e1))] * d \
        + [(math.log(1e-6), math.log(1.0))]
    rng = make_rng(seed)
    starts = [np.array([0.0] + [math.log(0.3)] * d + [math.log(1e-2)])]
    for _ in range(n_restarts - 1):
        starts.append(np.array([rng.uniform(lo, hi) for lo, hi in log_b]))
    best = None
    for th0 in starts:
        res = optimize.minimize(_neg_log_marginal, th0, args=(x, ys),
                                method="L-BFGS-B", bounds=log_b)
        if best is None or res.fun < best.fun:
            best = res
    th = best.x
    return GpSurrogate(x, ys, y_mean, y_std, float(math.exp(th[0])),
                       np.exp(th[1:1 + d]), float(math.exp(th[1 + d])))


def expected_improvement(mu, sigma, best) -> np.ndarray:
    """EI for minimization; reduces to ``max(best - mu, 0)`` where sigma is 0."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    imp = best - mu
    out = np.maximum(imp, 0.0)
    pos = sigma > 0
    z = imp[pos] / sigma[pos]
    out[pos] = imp[pos] * stats.norm.cdf(z) + sigma[pos] * stats.norm.pdf(z)
    return np.maximum(out, 0.0)


def _acquisition(gp: GpSurrogate, u):
    mu, sd = gp.predict(u)
    if gp.flat:
        return np.zeros_like(mu), sd
    return expected_improvement(mu, sd, gp.incumbent), sd


def propose_next(surrogate: GpSurrogate, bounds: Optional[dict] = None, seed: int = 0,
                 n_candidates: int = N_CANDIDATES, n_refine: int = N_REFINE) -> HyperVector:
    """Maximize EI over the unit box; ties (within 1e-12) go to larger posterior std."""
    bounds = check_bounds(bounds)
    d = len(HYPER_NAMES)
    cand = qmc.Sobol(d, scramble=True, seed=make_rng(seed)).random(n_candidates)
    ei, sd = _acquisition(surrogate, cand)
    points = [cand]
    eis = [ei]
    sds = [sd]
    if not surrogate.flat and n_refine > 0:
        order = np.lexsort((-sd, -ei))[:n_refine]

        def neg_ei(u):
            return -float(_acquisition(surrogate, u[None, :])[0][0])

        for i in order:
            res = optimize.minimize(neg_ei, cand[i], method="L-BFGS-B",
                                    bounds=[(0.0, 1.0)] * d)
            u = np.clip(res.x, 0.0, 1.0)[None, :]
            e, s = _acquisition(surrogate, u)
            points.append(u)
            eis.append(e)
            sds.append(s)
    pts = np.vstack(points)
    ei = np.concatenate(eis)
    sd = np.concatenate(sds)
    top = ei.max()
    tied = np.flatnonzero(ei >= top - 1e-12 * max(1.0, abs(top)))
    pick = tied[np.argmax(sd[tied])]
    return HyperVector.from_unit(pts[pick], bounds)


# ---------------------------------------------------------------------------
# bilevel optimization


@dataclass
class BilevelResult:
    best: HyperVector
    best_objective: float
    history: list
    estimator: Optional[InrRegressor] = None
    """Final model refit on all samples at ``best`` (None if refit was skipped)."""

    def incumbent_trace(self) -> np.ndarray:
        out, cur = [], np.inf
        for r in self.history:
            if r.ok:
                cur = min(cur, r.objective)
            out.append(cur)
        return np.array(out)


def _lower_level(estimator, samples: SampleSet, lower_iters: Optional[int]):
    def objective(h: HyperVector, seed: int) -> float:
        params = dict(h.estimator_params(), seed=seed)
        if lower_iters is not None:
            params["iterations"] = int(lower_iters)
        est = clone(estimator).set_params(**params)
        tr = samples.train
        est.fit(tr.coords, tr.values)
        return validation_loss(est, samples.validation)
    return objective


def bilevel_optimize(samples: SampleSet, estimator: Optional[InrRegressor] = None,
                     bounds: Optional[dict] = None, budget: int = 60,
                     lower_iters: Optional[int] = 2000, seed: int = 0,
                     n_initial: int = N_INITIAL, objective: Optional[Callable] = None,
                     refit: bool = True, history_path=None,
                     resume_history: Sequence[SearchRecord] = ()) -> BilevelResult:
    """Minimize validation loss over the hyper box with GP/EI.

    The first ``n_initial`` points come from a scrambled Halton design; every
    later point is proposed from a GP fitted to all successful evaluations.
    Evaluation ``i`` trains with seed ``derive_seed(seed, i)``. A failed
    (non-finite) evaluation is recorded with the worst objective seen so far
    and left out of the surrogate. ``objective(hyper, seed)`` replaces the
    INR lower level when given (useful for synthetic problems).

    ``resume_history`` replays already finished evaluations (e.g. read back
    from a history file) instead of recomputing them; since proposals depend
    only on earlier records, the continued run matches an uninterrupted one.
    """
    bounds = check_bounds(bounds)
    if budget < n_initial:
        raise ValueError(f"budget {budget} is smaller than the initial design ({n_initial})")
    if estimator is None:
        estimator = InrRegressor()
    if objective is None:
        if not samples.has_split:
            raise ValueError("bilevel optimization needs a train/validation split")
        objective = _lower_level(estimator, samples, lower_iters)

    history: list[SearchRecord] = []
    resume_history = list(resume_history)
    if history_path is not None and resume_history:
        Path(history_path).unlink(missing_ok=True)
    log = open(history_path, "a") if history_path is not None else None

    def record(h: HyperVector, i: int, value, status, dt):
        if status != "ok":
            ok_vals = [r.objective for r in history if r.ok]
            value = max(ok_vals) if ok_vals else float("inf")
        rec = SearchRecord(h, float(value), dt, derive_seed(seed, i), status)
        history.append(rec)
        if log is not None:
            log.write(rec.to_json() + "\n")
            log.flush()
        logger.info("eval %d: %s -> %.6g (%s)", i, h, rec.objective, status)

    def evaluate(h: HyperVector, i: int):
        if i < len(resume_history):
            old = resume_history[i]
            if not np.allclose(old.hyper.as_array(), h.as_array(), rtol=0, atol=1e-9):
                raise RuntimeError(f"resumed history diverges at evaluation {i}")
            return (old.objective if old.ok else float("nan")), old.status, old.wall_time
        t0 = time.time()
        try:
            v = float(objective(h, derive_seed(seed, i)))
            status = "ok" if math.isfinite(v) else "failed"
        except NonFiniteError:
            v, status = float("nan"), "failed"
        return v, status, time.time() - t0

    try:
        design = qmc.Halton(len(HYPER_NAMES), scramble=True, seed=make_rng(seed)).random(n_initial)
        for i, u in enumerate(design):
            h = HyperVector.from_unit(u, bounds)
            record(h, i, *evaluate(h, i))

        for i in range(n_initial, budget):
            ok = [r for r in history if r.ok]
            if len(ok) >= 2:
                gp = gp_fit(ok, bounds, seed=derive_seed(seed, i, 1))
                h = propose_next(gp, bounds, seed=derive_seed(seed, i, 2))
            else:
                u = make_rng(seed, i).uniform(size=len(HYPER_NAMES))
                h = HyperVector.from_unit(u, bounds)
            record(h, i, *evaluate(h, i))
    finally:
        if log is not None:
            log.close()

    ok = [r for r in history if r.ok]
    if not ok:
        raise RuntimeError("every bilevel evaluation failed")
    best_rec = min(ok, key=lambda r: r.objective)
    final = None
    if refit:
        params = dict(best_rec.hyper.estimator_params(), seed=best_rec.seed)
        if lower_iters is not None:
            params["iterations"] = int(lower_iters)
        final = clone(estimator).set_params(**params)
        final.fit(samples.coords, samples.values)
    return BilevelResult(best_rec.hyper, best_rec.objective, history, final)


class BilevelSearch(RegressorMixin, BaseEstimator):
    """Estimator wrapper: split, run bilevel optimization, refit on everything.

    ``fit(X, y)`` partitions the data ``train_fraction`` / rest with
    ``split_seed``, searches the hyper box and refits ``estimator`` at the
    winner on all of ``X``. ``predict`` uses that refit model.
    """

    def __init__(self, estimator=None, bounds=None, budget=60, lower_iters=2000,
                 train_fraction=0.8, split_seed=0, seed=0, n_initial=N_INITIAL):
        self.estimator = estimator
        self.bounds = bounds
        self.budget = budget
        self.lower_iters = lower_iters
        self.train_fraction = train_fraction
        self.split_seed = split_seed
        self.seed = seed
        self.n_initial = n_initial

    def fit(self, X, y):
        from .core import split_samples

        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        s = split_samples(SampleSet(X, y), self.train_fraction, self.split_seed)
        est = InrRegressor() if self.estimator is None else self.estimator
        res = bilevel_optimize(s, est, self.bounds, self.budget, self.lower_iters,
                               self.seed, self.n_initial)
        self.result_ = res
        self.best_hyper_ = res.best
        self.best_estimator_ = res.estimator
        return self

    def predict(self, X):
        check_is_fitted(self, "best_estimator_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self.best_estimator_.predict(X)
