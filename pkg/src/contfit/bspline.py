"""Tensor-product cubic B-spline fitting with a Tikhonov (ridge) penalty.

Basis: ``M + 2`` kernel centers per axis, ``lo + k * delta`` for
``k = 0 .. M + 1`` with ``delta = (hi - lo) / (M + 1)``, i.e. ``M`` interior
knots plus one center on each end of the domain. Bases sum to one on
``[lo + delta, hi - delta]``. Coefficients are flattened row-major as
``k_x * (M + 2) + k_y``.

The normal equations ``(Phi^T Phi + lam I) c = Phi^T y`` are solved with a
banded Cholesky factorization (LAPACK ``dpbtrf``/``dpbtrs``): under the
row-major ordering the Gram matrix has half-bandwidth ``3 (M + 2) + 3``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .core import EvalGrid, SampleSet, check_coords, eval_grid_coords, nrmse

logger = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    """Cholesky of the regularized Gram matrix hit a non-positive pivot."""

    def __init__(self, pivot: int, lam: float):
        self.pivot = pivot
        self.lam = lam
        super().__init__(
            f"Gram matrix + {lam:g} I is not positive definite: "
            f"Cholesky failed at pivot {pivot}"
        )


@dataclass(frozen=True)
class SplineConfig:
    m: int
    domain: tuple[float, float] = (0.0, 3.0)

    def __post_init__(self):
        if int(self.m) < 2:
            raise ValueError(f"need at least 2 knots per axis, got m={self.m}")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"bad spline domain {self.domain}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "domain", (float(lo), float(hi)))

    @property
    def delta(self) -> float:
        lo, hi = self.domain
        return (hi - lo) / (self.m + 1)

    @property
    def n_basis(self) -> int:
        """Basis functions per axis."""
        return self.m + 2

    @property
    def n_coeffs(self) -> int:
        return self.n_basis**2

    @property
    def bandwidth(self) -> int:
        """Half-bandwidth of the Gram matrix."""
        return min(3 * self.n_basis + 3, self.n_coeffs - 1)

    def centers(self) -> np.ndarray:
        k = np.arange(self.n_basis, dtype=np.float64)
        return self.domain[0] + k * self.delta


def cubic_kernel(x):
    """Centered cubic B-spline, supported on [-2, 2]."""
    a = np.abs(np.asarray(x, dtype=np.float64))
    inner = 2.0 / 3.0 - a * a + 0.5 * a**3
    outer = (2.0 - a) ** 3 / 6.0
    out = np.where(a <= 1.0, inner, np.where(a <= 2.0, outer, 0.0))
    return float(out) if out.ndim == 0 else out


def _axis_weights(t: np.ndarray, cfg: SplineConfig):
    """Indices and kernel values of the 4 candidate bases along one axis."""
    s = (t - cfg.domain[0]) / cfg.delta
    base = np.floor(s).astype(np.int64) - 1
    idx = base[:, None] + np.arange(4)
    val = cubic_kernel(s[:, None] - idx)
    valid = (idx >= 0) & (idx < cfg.n_basis)
    val = np.where(valid, val, 0.0)
    return np.clip(idx, 0, cfg.n_basis - 1), val


def build_design_matrix(coords, cfg: SplineConfig) -> sp.csr_matrix:
    """Sparse ``(N, (M+2)^2)`` matrix of basis values at ``coords``.

    Accepts a SampleSet or an ``(N, 2)`` array.
    """
    if isinstance(coords, SampleSet):
        coords = coords.coords
    c = check_coords(coords)
    n = c.shape[0]
    ix, vx = _axis_weights(c[:, 0], cfg)
    iy, vy = _axis_weights(c[:, 1], cfg)
    cols = (ix[:, :, None] * cfg.n_basis + iy[:, None, :]).reshape(n, 16)
    vals = (vx[:, :, None] * vy[:, None, :]).reshape(n, 16)
    keep = vals != 0.0
    rows = np.broadcast_to(np.arange(n)[:, None], (n, 16))
    phi = sp.csr_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(n, cfg.n_coeffs)
    )
    phi.sort_indices()
    return phi


def gram_band(phi: sp.spmatrix, bandwidth: int) -> np.ndarray:
    """Lower band storage of ``Phi^T Phi``: ``ab[d, j] = G[j + d, j]``."""
    g = (phi.T @ phi).tocoo()
    n = phi.shape[1]
    d = g.row - g.col
    lower = (d >= 0) & (d <= bandwidth)
    if np.any(np.abs(d) > bandwidth):
        raise ValueError("Gram matrix has entries outside the declared band")
    ab = np.zeros((bandwidth + 1, n))
    np.add.at(ab, (d[lower], g.col[lower]), g.data[lower])
    return ab


def solve_banded_ridge(ab: np.ndarray, rhs: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(G + lam I) c = rhs`` given the lower band ``ab`` of ``G``."""
    work = ab.copy()
    work[0] += lam
    factor, info = lapack.dpbtrf(work, lower=1)
    if info > 0:
        raise SingularSystemError(info - 1, lam)
    if info < 0:
        raise ValueError(f"dpbtrf: illegal argument {-info}")
    c, info = lapack.dpbtrs(factor, rhs, lower=1)
    if info != 0:
        raise ValueError(f"dpbtrs: illegal argument {-info}")
    return c


def ridge_fit(phi: sp.spmatrix, y, lam: float, bandwidth: Optional[int] = None) -> np.ndarray:
    """Ridge coefficients ``(Phi^T Phi + lam I)^{-1} Phi^T y``."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != phi.shape[0]:
        raise ValueError(f"y has {y.shape[0]} entries, design matrix has {phi.shape[0]} rows")
    if bandwidth is None:
        nb = int(round(np.sqrt(phi.shape[1])))
        bandwidth = min(3 * nb + 3, phi.shape[1] - 1)
    ab = gram_band(phi, bandwidth)
    return solve_banded_ridge(ab, phi.T @ y, lam)


def eval_spline(cfg: SplineConfig, coeffs, coords) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64).ravel()
    if coeffs.shape[0] != cfg.n_coeffs:
        raise ValueError(f"expected {cfg.n_coeffs} coefficients, got {coeffs.shape[0]}")
    return build_design_matrix(coords, cfg) @ coeffs


@dataclass
class SplineModel:
    config: SplineConfig
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64).ravel()
        if self.coeffs.shape[0] != self.config.n_coeffs:
            raise ValueError(
                f"expected {self.config.n_coeffs} coefficients, got {self.coeffs.shape[0]}"
            )

    def __call__(self, coords) -> np.ndarray:
        return eval_spline(self.config, self.coeffs, coords)


class BSplineRegressor(RegressorMixin, BaseEstimator):
    """Ridge-regularized tensor-product cubic B-spline on a square domain.

    Parameters
    ----------
    n_knots : int
        Knots per axis (``M``); the model has ``(M + 2)**2`` coefficients.
    alpha : float
        Tikhonov weight on the squared coefficient norm.
    domain : tuple of float
        Interval spanned by the knots on both axes.
    """

    def __init__(self, n_knots=75, alpha=2.51e-2, domain=(0.0, 3.0)):
        self.n_knots = n_knots
        self.alpha = alpha
        self.domain = domain

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 input features, got {X.shape[1]}")
        cfg = SplineConfig(self.n_knots, tuple(self.domain))
        phi = build_design_matrix(X, cfg)
        self.coef_ = ridge_fit(phi, y, float(self.alpha), cfg.bandwidth)
        self.config_ = cfg
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return eval_spline(self.config_, self.coef_, X)

    @property
    def model_(self) -> SplineModel:
        check_is_fitted(self, "coef_")
        return SplineModel(self.config_, self.coef_)


@dataclass
class SplineSearchResult:
    best_lambda: float
    best_m: int
    best_nrmse: float
    lambdas: np.ndarray
    ms: np.ndarray
    table: np.ndarray
    """NRMSE with shape ``(len(ms), len(lambdas))``; NaN marks singular cells."""

    def rows(self):
        for a, m in enumerate(self.ms):
            for b, lam in enumerate(self.lambdas):
                yield int(m), float(lam), float(self.table[a, b])

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("m,lambda,nrmse\n")
            for m, lam, v in self.rows():
                fh.write(f"{m},{lam:.17e},{'nan' if np.isnan(v) else repr(v)}\n")


def _sweep_one_m(coords, values, grid_coords, truth, m, lambdas, domain):
    cfg = SplineConfig(m, domain)
    phi = build_design_matrix(coords, cfg)
    ab = gram_band(phi, cfg.bandwidth)
    rhs = phi.T @ values
    phi_eval = build_design_matrix(grid_coords, cfg)
    out = np.full(len(lambdas), np.nan)
    for b, lam in enumerate(lambdas):
        try:
            c = solve_banded_ridge(ab, rhs, float(lam))
        except SingularSystemError as exc:
            logger.info("m=%d: %s", m, exc)
            continue
        out[b] = nrmse(phi_eval @ c, truth)
    return out


def oracle_grid_search(samples: SampleSet, grid: EvalGrid, lambdas: Sequence[float],
                       ms: Sequence[int], workers: int = 1,
                       domain=(0.0, 3.0)) -> SplineSearchResult:
    """NRMSE against ``grid.truth`` for every (M, lambda) pair.

    The Gram band for each M is assembled once and only its diagonal shifts
    with lambda. Ties go to the smaller M, then the smaller lambda.
    """
    if grid.truth is None:
        raise ValueError("oracle search needs a grid carrying truth values")
    lambdas = np.asarray(lambdas, dtype=np.float64)
    ms = np.asarray(ms, dtype=np.int64)
    if lambdas.size == 0 or ms.size == 0:
        raise ValueError("lambda and M grids must be nonempty")
    gc = eval_grid_coords(grid)
    args = [(samples.coords, samples.values, gc, grid.truth, int(m), lambdas, domain)
            for m in ms]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_sweep_one_m, *zip(*args)))
    else:
        rows = [_sweep_one_m(*a) for a in args]
    table = np.vstack(rows)
    if np.all(np.isnan(table)):
        raise SingularSystemError(0, float(lambdas.min()))
    best, best_key = None, None
    for a, m in enumerate(ms):
        for b, lam in enumerate(lambdas):
            v = table[a, b]
            if np.isnan(v):
                continue
            key = (v, m, lam)
            if best_key is None or key < best_key:
                best_key, best = key, (a, b)
    a, b = best
    return SplineSearchResult(float(lambdas[b]), int(ms[a]), float(table[a, b]),
                              lambdas, ms, table)


def default_lambdas() -> np.ndarray:
    """101 values with log10 lambda from -5 to 5 in steps of 0.1."""
    return 10.0 ** (np.arange(-50, 51) / 10.0)


def default_ms() -> np.ndarray:
    return np.arange(5, 101, 5)
