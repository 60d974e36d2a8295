"""Shared data model: samples, evaluation grids, the rect target and NRMSE.

All arithmetic is float64. Randomness comes from numpy's PCG64 bit generator
seeded through ``SeedSequence`` so that child streams (per grid cell, per
evaluation) can be derived deterministically from one base seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

RNG_NAME = "numpy.random.PCG64"
SAMPLE_DOMAIN = (0.0, 3.0)


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and an optional child key."""
    seed = _check_seed(seed)
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *spawn_key: int) -> int:
    """Deterministic 64-bit child seed for ``(seed, *spawn_key)``."""
    seed = _check_seed(seed)
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in spawn_key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def check_coords(coords, name="coords") -> np.ndarray:
    """Validate an ``(n, 2)`` float array of finite coordinates."""
    arr = np.asarray(coords, dtype=np.float64)
    if arr.ndim == 1 and arr.shape[0] == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_values(values, n: Optional[int] = None, name="values") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Scattered samples ``values[n] = f(coords[n])`` with an optional split.

    ``train_idx`` / ``val_idx`` are sorted index arrays; when present they
    partition ``range(n)``.
    """

    coords: np.ndarray
    values: np.ndarray
    train_idx: Optional[np.ndarray] = None
    val_idx: Optional[np.ndarray] = None

    def __post_init__(self):
        coords = check_coords(self.coords)
        values = check_values(self.values, coords.shape[0])
        if coords.shape[0] < 1:
            raise ValueError("a SampleSet needs at least one sample")
        coords.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "values", values)
        if (self.train_idx is None) != (self.val_idx is None):
            raise ValueError("train_idx and val_idx must be given together")
        if self.train_idx is not None:
            tr = np.sort(np.asarray(self.train_idx, dtype=np.int64))
            va = np.sort(np.asarray(self.val_idx, dtype=np.int64))
            if tr.size == 0 or va.size == 0:
                raise ValueError("train and validation partitions must be nonempty")
            both = np.concatenate([tr, va])
            if not np.array_equal(np.sort(both), np.arange(len(values))):
                raise ValueError("train/validation indices must partition the samples")
            tr.setflags(write=False)
            va.setflags(write=False)
            object.__setattr__(self, "train_idx", tr)
            object.__setattr__(self, "val_idx", va)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def has_split(self) -> bool:
        return self.train_idx is not None

    def subset(self, idx) -> "SampleSet":
        idx = np.asarray(idx, dtype=np.int64)
        return SampleSet(self.coords[idx], self.values[idx])

    @property
    def train(self) -> "SampleSet":
        if not self.has_split:
            raise ValueError("SampleSet has no train/validation split")
        return self.subset(self.train_idx)

    @property
    def validation(self) -> "SampleSet":
        if not self.has_split:
            raise ValueError("SampleSet has no train/validation split")
        return self.subset(self.val_idx)

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented

        def same(a, b):
            return (a is None and b is None) or (
                a is not None and b is not None and np.array_equal(a, b)
            )

        return (
            np.array_equal(self.coords, other.coords)
            and np.array_equal(self.values, other.values)
            and same(self.train_idx, other.train_idx)
            and same(self.val_idx, other.val_idx)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EvalGrid:
    """Dense rectangular evaluation grid, row-major with y outer and x inner."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    n_x: int
    n_y: int
    truth: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("grid extent must satisfy min < max on both axes")
        if int(self.n_x) < 2 or int(self.n_y) < 2:
            raise ValueError("grid resolution must be at least 2 on both axes")
        object.__setattr__(self, "n_x", int(self.n_x))
        object.__setattr__(self, "n_y", int(self.n_y))
        if self.truth is not None:
            truth = check_values(self.truth, self.n_x * self.n_y, "truth")
            truth.setflags(write=False)
            object.__setattr__(self, "truth", truth)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_y, self.n_x)

    @property
    def size(self) -> int:
        return self.n_x * self.n_y

    def xs(self) -> np.ndarray:
        j = np.arange(self.n_x, dtype=np.float64)
        xs = self.x_min + j * (self.x_max - self.x_min) / (self.n_x - 1)
        xs[-1] = self.x_max
        return xs

    def ys(self) -> np.ndarray:
        i = np.arange(self.n_y, dtype=np.float64)
        ys = self.y_min + i * (self.y_max - self.y_min) / (self.n_y - 1)
        ys[-1] = self.y_max
        return ys

    def with_truth(self, target: Callable) -> "EvalGrid":
        c = eval_grid_coords(self)
        return EvalGrid(
            self.x_min, self.x_max, self.y_min, self.y_max, self.n_x, self.n_y,
            truth=target(c[:, 0], c[:, 1]),
        )

    def nearest_row(self, y: float) -> int:
        return int(np.argmin(np.abs(self.ys() - y)))

    def meta(self) -> dict:
        return {
            "x_min": self.x_min, "x_max": self.x_max,
            "y_min": self.y_min, "y_max": self.y_max,
            "n_x": self.n_x, "n_y": self.n_y,
        }


def default_grid(with_truth: bool = True) -> EvalGrid:
    """The 501 x 501 grid over [-0.3, 3.3]^2, optionally carrying rect truth."""
    g = EvalGrid(-0.3, 3.3, -0.3, 3.3, 501, 501)
    return g.with_truth(rect2d) if with_truth else g


def _rect(t):
    a = np.abs(np.asarray(t, dtype=np.float64))
    return np.where(a < 0.5, 1.0, np.where(a == 0.5, 0.5, 0.0))


def rect2d(x, y):
    """Unit square indicator on [1, 2]^2; edges take the value 1/2.

    Works elementwise on scalars or arrays; scalar input gives a float.
    """
    out = _rect(np.asarray(x, dtype=np.float64) - 1.5) * _rect(
        np.asarray(y, dtype=np.float64) - 1.5
    )
    return float(out) if out.ndim == 0 else out


def gen_samples(n: int, seed: int, target: Callable = rect2d) -> SampleSet:
    """Draw ``n`` noise-free samples uniformly on [0, 3]^2."""
    if int(n) < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(seed)
    lo, hi = SAMPLE_DOMAIN
    coords = rng.uniform(lo, hi, size=(int(n), 2))
    values = np.asarray(target(coords[:, 0], coords[:, 1]), dtype=np.float64)
    return SampleSet(coords, values.reshape(-1))


def split_samples(s: SampleSet, train_fraction: float, seed: int) -> SampleSet:
    """Random train/validation partition with ``round(train_fraction * N)`` train samples."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(s)
    n_train = int(round(train_fraction * n))
    if n_train < 1 or n_train > n - 1:
        raise ValueError(
            f"train_fraction={train_fraction} with N={n} gives an empty partition"
        )
    perm = make_rng(seed).permutation(n)
    return SampleSet(s.coords, s.values, perm[:n_train], perm[n_train:])


def nrmse(predicted, truth) -> float:
    """``||predicted - truth||_2 / ||truth||_2``."""
    p = np.asarray(predicted, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape or p.size == 0:
        raise ValueError(
            f"predicted and truth must have equal nonzero length ({p.size} vs {t.size})"
        )
    denom = np.linalg.norm(t)
    if denom == 0.0:
        raise ValueError("truth has zero norm")
    return float(np.linalg.norm(p - t) / denom)


def eval_grid_coords(g: EvalGrid) -> np.ndarray:
    """All grid points as an ``(n_x * n_y, 2)`` array, y outer, x inner."""
    xx, yy = np.meshgrid(g.xs(), g.ys())
    return np.column_stack([xx.ravel(), yy.ravel()])


# ---------------------------------------------------------------------------
# file formats


def write_samples_csv(path, s: SampleSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for (x, y), v in zip(s.coords.tolist(), s.values.tolist()):
            w.writerow([repr(x), repr(y), repr(v)])


def read_samples_csv(path) -> SampleSet:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ["x", "y", "value"]:
            raise ValueError(f"{path}: expected header x,y,value, got {header}")
        rows = [[float(v) for v in row] for row in r if row]
    if not rows:
        raise ValueError(f"{path}: no samples")
    arr = np.array(rows, dtype=np.float64)
    return SampleSet(arr[:, :2], arr[:, 2])


def write_grid(path, g: EvalGrid, values, meta: Optional[dict] = None) -> None:
    """Write grid values as raw little-endian float64 plus a JSON sidecar.

    ``path`` is the ``.bin`` file; the sidecar is ``path + '.json'``.
    """
    v = check_values(values, g.size, "grid values")
    path = Path(path)
    v.astype("<f8").tofile(path)
    side = {"format": "float64-le-row-major", **g.meta()}
    if meta:
        side["meta"] = meta
    Path(str(path) + ".json").write_text(json.dumps(side, indent=2, sort_keys=True))


def read_grid(path) -> tuple[EvalGrid, np.ndarray, dict]:
    path = Path(path)
    side_path = Path(str(path) + ".json")
    try:
        side = json.loads(side_path.read_text())
        g = EvalGrid(side["x_min"], side["x_max"], side["y_min"], side["y_max"],
                     side["n_x"], side["n_y"])
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ValueError(f"{side_path}: malformed grid sidecar ({exc})") from exc
    v = np.fromfile(path, dtype="<f8")
    if v.size != g.size:
        raise ValueError(f"{path}: holds {v.size} values, sidecar says {g.size}")
    return g, v.astype(np.float64), side.get("meta", {})


def write_grid_csv(path, g: EvalGrid, values) -> None:
    v = check_values(values, g.size, "grid values")
    c = eval_grid_coords(g)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for (x, y), val in zip(c.tolist(), v.tolist()):
            w.writerow([repr(x), repr(y), repr(val)])


def write_cross_section(path, g: EvalGrid, values, y: float = 1.5,
                        truth: Optional[Sequence[float]] = None) -> int:
    """Write the grid row nearest ``y`` as CSV; returns the row index."""
    row = g.nearest_row(y)
    v = np.asarray(values, dtype=np.float64).reshape(g.shape)[row]
    t = None if truth is None else np.asarray(truth).reshape(g.shape)[row]
    y_row = g.ys()[row]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"] + ([] if t is None else ["truth"]))
        for j, x in enumerate(g.xs().tolist()):
            line = [repr(x), repr(float(y_row)), repr(float(v[j]))]
            if t is not None:
                line.append(repr(float(t[j])))
            w.writerow(line)
    return row
