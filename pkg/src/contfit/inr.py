"""Hash-encoded implicit neural representation in plain numpy.

The model is ``f(r) = MLP(encode(r))``. ``encode`` is a 2D multiresolution
grid encoder: level ``l`` has resolution ``floor(base_resolution * scale**l)``,
coarse levels are stored densely and fine ones in a hash table of
``2**table_size_log2`` rows. Corner features are bilinearly interpolated and
the levels concatenated. The MLP uses ReLU hidden layers and a linear scalar
output.

Gradients are written out by hand (reverse mode) and the encoder gather is
expressed as one sparse interpolation matrix per level, so the backward pass
through the tables is a sparse transpose-product that only touches rows
used by the batch.

Parameter order (used by checkpoints and the flat views): tables level by
level, then for each MLP layer its weight matrix followed by its bias.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .core import SampleSet, check_coords, make_rng

HASH_PRIMES = (1, 2654435761)


class NonFiniteError(FloatingPointError):
    """Raised when a parameter or the training loss stops being finite."""


@dataclass(frozen=True)
class EncoderConfig:
    levels: int = 8
    features_per_level: int = 2
    base_resolution: int = 4
    scale: float = 2.0
    table_size_log2: int = 15
    domain: tuple[float, float] = (0.0, 3.0)

    def __post_init__(self):
        if self.levels < 1 or self.features_per_level < 1 or self.base_resolution < 1:
            raise ValueError("levels, features_per_level and base_resolution must be >= 1")
        if not self.scale > 1.0:
            raise ValueError(f"scale must exceed 1, got {self.scale}")
        if self.table_size_log2 < 1:
            raise ValueError("table_size_log2 must be >= 1")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"bad encoder domain {self.domain}")
        object.__setattr__(self, "domain", (float(lo), float(hi)))

    def resolution(self, level: int) -> int:
        # small epsilon guards floor against b**l landing just below an integer
        return int(math.floor(self.base_resolution * self.scale**level + 1e-9))

    def is_dense(self, level: int) -> bool:
        n = self.resolution(level) + 1
        return n * n <= 2**self.table_size_log2

    def table_rows(self, level: int) -> int:
        n = self.resolution(level) + 1
        return min(2**self.table_size_log2, n * n)

    @property
    def output_dim(self) -> int:
        return self.levels * self.features_per_level


@dataclass(frozen=True)
class TrainConfig:
    lambda_enc: float = 7.94e-3
    lambda_mlp: float = 1e-6
    learning_rate: float = 3e-3
    iterations: int = 2000
    adam: tuple[float, float, float] = (0.9, 0.999, 1e-8)
    seed: int = 0
    init_scale: float = 1e-4
    lr_final_ratio: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.lr_final_ratio <= 1.0:
            raise ValueError("lr_final_ratio must lie in (0, 1]")
        if self.lambda_enc < 0 or self.lambda_mlp < 0:
            raise ValueError("weight decays must be nonnegative")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        b1, b2, eps = self.adam
        if not (0 <= b1 < 1 and 0 <= b2 < 1 and eps > 0):
            raise ValueError(f"invalid Adam constants {self.adam}")
        object.__setattr__(self, "adam", tuple(float(a) for a in self.adam))


def hash_index(cell, level: int, cfg: EncoderConfig):
    """Table row of integer grid vertex ``cell = (x1, x2)`` on ``level``.

    Dense levels use row-major ``x2 * (N + 1) + x1``; hashed levels use
    ``(x1 * 1 XOR x2 * 2654435761) mod 2**T``. Accepts an ``(..., 2)`` array.
    """
    if not 0 <= level < cfg.levels:
        raise ValueError(f"level {level} outside [0, {cfg.levels})")
    c = np.asarray(cell, dtype=np.uint64)
    x1, x2 = c[..., 0], c[..., 1]
    if cfg.is_dense(level):
        idx = x2 * np.uint64(cfg.resolution(level) + 1) + x1
    else:
        mask = np.uint64(2**cfg.table_size_log2 - 1)
        idx = ((x1 * np.uint64(HASH_PRIMES[0])) ^ (x2 * np.uint64(HASH_PRIMES[1]))) & mask
    idx = idx.astype(np.int64)
    return int(idx) if idx.ndim == 0 else idx


def _level_weights(coords: np.ndarray, level: int, cfg: EncoderConfig):
    """Corner rows ``(n, 4)`` and bilinear weights ``(n, 4)`` for one level."""
    lo, hi = cfg.domain
    u = np.clip((coords - lo) / (hi - lo), 0.0, 1.0)
    res = cfg.resolution(level)
    p = u * res
    cell = np.minimum(np.floor(p), res - 1).astype(np.int64)
    t = p - cell
    corners = []
    weights = []
    for dy in (0, 1):
        for dx in (0, 1):
            vert = cell + np.array([dx, dy])
            corners.append(hash_index(vert, level, cfg))
            wx = t[:, 0] if dx else 1.0 - t[:, 0]
            wy = t[:, 1] if dy else 1.0 - t[:, 1]
            weights.append(wx * wy)
    return np.stack(corners, axis=1), np.stack(weights, axis=1)


def interpolation_matrices(coords, cfg: EncoderConfig) -> list[sp.csr_matrix]:
    """One sparse ``(n, table_rows)`` bilinear gather matrix per level."""
    coords = check_coords(coords)
    n = coords.shape[0]
    rows = np.repeat(np.arange(n), 4)
    mats = []
    for level in range(cfg.levels):
        idx, w = _level_weights(coords, level, cfg)
        m = sp.csr_matrix(
            (w.ravel(), (rows, idx.ravel())), shape=(n, cfg.table_rows(level))
        )
        mats.append(m)
    return mats


class Gather:
    """Precomputed encoder gather for a fixed set of coordinates.

    ``encode`` maps tables to features; ``scatter`` maps a feature gradient
    back onto table rows (the transpose product, a scatter-add).
    """

    def __init__(self, coords, cfg: EncoderConfig):
        self.cfg = cfg
        self.mats = interpolation_matrices(coords, cfg)
        self.mats_t = [m.T.tocsr() for m in self.mats]
        self.n = self.mats[0].shape[0]

    def encode(self, tables, out=None) -> np.ndarray:
        F = self.cfg.features_per_level
        if out is None:
            out = np.empty((self.n, self.cfg.output_dim))
        for lvl, (m, t) in enumerate(zip(self.mats, tables)):
            out[:, lvl * F:(lvl + 1) * F] = m @ t
        return out

    def scatter(self, grad_feats) -> list:
        F = self.cfg.features_per_level
        return [mt @ np.ascontiguousarray(grad_feats[:, lvl * F:(lvl + 1) * F])
                for lvl, mt in enumerate(self.mats_t)]


@dataclass(eq=False)
class InrModel:
    """Encoder tables plus MLP weights; ``weights[k]`` has shape (in, out)."""

    enc_config: EncoderConfig
    tables: list
    weights: list
    biases: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        cfg = self.enc_config
        if len(self.tables) != cfg.levels:
            raise ValueError(f"expected {cfg.levels} tables, got {len(self.tables)}")
        for lvl, t in enumerate(self.tables):
            if t.shape != (cfg.table_rows(lvl), cfg.features_per_level):
                raise ValueError(f"table {lvl} has shape {t.shape}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("MLP needs matching, nonempty weight and bias lists")
        width = cfg.output_dim
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or w.shape[0] != width or b.shape != (w.shape[1],):
                raise ValueError(f"MLP layer {k} shapes {w.shape}, {b.shape} are inconsistent")
            width = w.shape[1]
        if width != 1:
            raise ValueError("MLP output width must be 1")

    @classmethod
    def init(cls, enc_config: EncoderConfig, hidden: Sequence[int] = (32, 32),
             seed: int = 0, init_scale: float = 1e-4) -> "InrModel":
        """Tables uniform in ``[-init_scale, init_scale]``, Glorot-uniform weights, zero biases."""
        rng = make_rng(seed)
        tables = [
            rng.uniform(-init_scale, init_scale,
                        size=(enc_config.table_rows(l), enc_config.features_per_level))
            for l in range(enc_config.levels)
        ]
        widths = [enc_config.output_dim, *[int(h) for h in hidden], 1]
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            lim = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(enc_config, tables, weights, biases)

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights[:-1])

    def params(self) -> list:
        out = list(self.tables)
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def param_names(self) -> list[str]:
        names = [f"tables[{l}]" for l in range(len(self.tables))]
        for k in range(len(self.weights)):
            names += [f"weights[{k}]", f"biases[{k}]"]
        return names

    def with_params(self, params: list) -> "InrModel":
        K = len(self.tables)
        rest = params[K:]
        return InrModel(self.enc_config, list(params[:K]), list(rest[0::2]),
                        list(rest[1::2]), dict(self.meta))

    def copy(self) -> "InrModel":
        return self.with_params([p.copy() for p in self.params()])

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def check_finite(self) -> None:
        for name, p in zip(self.param_names(), self.params()):
            if not np.all(np.isfinite(p)):
                bad = [int(i) for i in np.argwhere(~np.isfinite(p))[0]]
                raise NonFiniteError(f"non-finite parameter at {name}{bad}")


def encode(coords, model: InrModel) -> np.ndarray:
    """Features of shape ``(n, K * F)``; a single 2-vector gives ``(K * F,)``."""
    single = np.ndim(coords) == 1
    feats = Gather(coords, model.enc_config).encode(model.tables)
    return feats[0] if single else feats


def _mlp_forward(x, model: InrModel, rowwise: bool = False):
    # rowwise=True avoids BLAS, whose blocking makes a row's result depend on
    # the batch it sits in; einsum sums each output in a fixed order
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = np.einsum("ij,jk->ik", h, w) if rowwise else h @ w
        h += b
        if k < last:
            np.maximum(h, 0.0, out=h)
        acts.append(h)
    return acts


def forward(model: InrModel, coords, gather: Optional[Gather] = None,
            chunk: int = 65536) -> np.ndarray:
    """Evaluate the model at ``(n, 2)`` coordinates; returns shape ``(n,)``.

    Points are processed in fixed-size chunks, each row independently, so
    the result does not depend on batching.
    """
    model.check_finite()
    if gather is not None:
        return _mlp_forward(gather.encode(model.tables), model, rowwise=True)[-1][:, 0]
    coords = check_coords(coords)
    out = np.empty(coords.shape[0])
    for s in range(0, coords.shape[0], chunk):
        c = coords[s:s + chunk]
        out[s:s + chunk] = _mlp_forward(encode(c, model), model, rowwise=True)[-1][:, 0]
    return out


def regularizer(model: InrModel, lambda_enc: float, lambda_mlp: float) -> float:
    enc = sum(float(np.vdot(t, t)) for t in model.tables)
    mlp = sum(float(np.vdot(w, w) + np.vdot(b, b))
              for w, b in zip(model.weights, model.biases))
    return lambda_enc * enc + lambda_mlp * mlp


def loss_and_grad(model: InrModel, batch: SampleSet, lambda_enc: float,
                  lambda_mlp: float, gather: Optional[Gather] = None):
    """Penalized mean-squared loss and its exact gradient.

    Loss is ``mean((y - f(r))**2) + lambda_enc * ||tables||^2 +
    lambda_mlp * ||mlp||^2``. The gradient is a list in ``model.params()``
    order. ``gather`` may carry a precomputed Gather for ``batch.coords``.
    """
    if gather is None:
        gather = Gather(batch.coords, model.enc_config)
    y = batch.values
    n = y.shape[0]
    x = gather.encode(model.tables)
    acts = _mlp_forward(x, model)
    resid = acts[-1][:, 0] - y
    data = float(resid @ resid) / n
    loss = data + regularizer(model, lambda_enc, lambda_mlp)

    g_ws, g_bs = [], []
    ones = np.ones(n)
    delta = (2.0 / n) * resid[:, None]
    for k in range(len(model.weights) - 1, -1, -1):
        w = model.weights[k]
        g_ws.append(acts[k].T @ delta + 2.0 * lambda_mlp * w)
        g_bs.append(ones @ delta + 2.0 * lambda_mlp * model.biases[k])
        delta = delta @ w.T
        if k > 0:
            delta *= acts[k] > 0.0
    g_ws.reverse()
    g_bs.reverse()

    g_tables = gather.scatter(delta)
    if lambda_enc:
        for g, t in zip(g_tables, model.tables):
            g += 2.0 * lambda_enc * t

    grads = list(g_tables)
    for gw, gb in zip(g_ws, g_bs):
        grads += [gw, gb]
    return loss, grads


@dataclass
class AdamState:
    step: int
    m: list
    v: list

    @classmethod
    def zeros_like(cls, params: list) -> "AdamState":
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: list, grads: list, state: AdamState, learning_rate: float,
              betas: tuple = (0.9, 0.999, 1e-8)) -> tuple[list, AdamState]:
    """One bias-corrected Adam update; returns new params and state.

    Weight decay is whatever the caller folded into ``grads``.
    """
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ValueError("params, grads and optimizer moments must be congruent")
    b1, b2, eps = betas
    t = state.step + 1
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        step = learning_rate * (m / c1) / (np.sqrt(v / c2) + eps)
        new_p.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(t, new_m, new_v)


def learning_rates(cfg: TrainConfig) -> np.ndarray:
    """Per-iteration step sizes: geometric from ``tau`` to ``tau * lr_final_ratio``."""
    n = cfg.iterations
    if n == 1 or cfg.lr_final_ratio == 1.0:
        return np.full(n, cfg.learning_rate)
    return cfg.learning_rate * cfg.lr_final_ratio ** (np.arange(n) / (n - 1))


def train(samples: SampleSet, enc_cfg: EncoderConfig, train_cfg: TrainConfig,
          hidden: Sequence[int] = (32, 32), callback=None):
    """Full-batch Adam on the penalized loss.

    Returns ``(model, loss_trace)`` where ``loss_trace[i]`` is the loss at
    the parameters before update ``i``.
    """
    if len(samples) < 1:
        raise ValueError("cannot train on an empty sample set")
    model = InrModel.init(enc_cfg, hidden, seed=train_cfg.seed,
                          init_scale=train_cfg.init_scale)
    gather = Gather(samples.coords, enc_cfg)
    params = model.params()
    state = AdamState.zeros_like(params)
    trace = np.empty(train_cfg.iterations)
    lr = learning_rates(train_cfg)
    for it in range(train_cfg.iterations):
        # overflow is detected through the loss below
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grads = loss_and_grad(model, samples, train_cfg.lambda_enc,
                                        train_cfg.lambda_mlp, gather)
        if not math.isfinite(loss):
            raise NonFiniteError(
                f"loss became non-finite at iteration {it}; learning rate too high?"
            )
        trace[it] = loss
        params, state = adam_step(params, grads, state, lr[it], train_cfg.adam)
        model = model.with_params(params)
        if callback is not None:
            callback(it, loss, model)
    model.check_finite()
    return model, trace


# ---------------------------------------------------------------------------
# checkpoints: magic, 8-byte little-endian header length, JSON header, float64 blob

_MAGIC = b"CFINR001"


def save_checkpoint(path, model: InrModel, extra: Optional[dict] = None) -> None:
    header = {
        "enc_config": asdict(model.enc_config),
        "hidden": list(model.hidden),
        "shapes": [list(p.shape) for p in model.params()],
        "names": model.param_names(),
        "dtype": "float64-le",
        "meta": {**model.meta, **(extra or {})},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for p in model.params():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path) -> InrModel:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise ValueError(f"{path}: not an INR checkpoint")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen])
    enc = header["enc_config"]
    enc["domain"] = tuple(enc["domain"])
    cfg = EncoderConfig(**enc)
    offset = 16 + hlen
    params = []
    for shape in header["shapes"]:
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        params.append(arr.reshape(shape).astype(np.float64))
        offset += 8 * count
    if offset != len(data):
        raise ValueError(f"{path}: trailing or missing parameter bytes")
    template = InrModel.init(cfg, header["hidden"])
    model = template.with_params(params)
    model.meta = header.get("meta", {})
    return model


def training_mse(model: InrModel, samples: SampleSet) -> float:
    r = forward(model, samples.coords) - samples.values
    return float(r @ r) / len(samples)


class InrRegressor(RegressorMixin, BaseEstimator):
    """Hash-encoded INR with separate encoder / MLP weight decay.

    Every constructor argument is a plain hyperparameter, so the estimator
    clones and grid-searches like any scikit-learn regressor. ``scale`` is
    the cross-level resolution factor ``b``.
    """

    def __init__(self, levels=8, features_per_level=2, base_resolution=4, scale=2.0,
                 table_size_log2=15, hidden=(32, 32), lambda_enc=7.94e-3,
                 lambda_mlp=1e-6, learning_rate=3e-3, iterations=2000, seed=0,
                 init_scale=1e-4, adam=(0.9, 0.999, 1e-8), lr_final_ratio=1.0,
                 domain=(0.0, 3.0)):
        self.levels = levels
        self.features_per_level = features_per_level
        self.base_resolution = base_resolution
        self.scale = scale
        self.table_size_log2 = table_size_log2
        self.hidden = hidden
        self.lambda_enc = lambda_enc
        self.lambda_mlp = lambda_mlp
        self.learning_rate = learning_rate
        self.iterations = iterations
        self.seed = seed
        self.init_scale = init_scale
        self.adam = adam
        self.lr_final_ratio = lr_final_ratio
        self.domain = domain

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(int(self.levels), int(self.features_per_level),
                             int(self.base_resolution), float(self.scale),
                             int(self.table_size_log2), tuple(self.domain))

    def train_config(self) -> TrainConfig:
        return TrainConfig(float(self.lambda_enc), float(self.lambda_mlp),
                           float(self.learning_rate), int(self.iterations),
                           tuple(self.adam), int(self.seed), float(self.init_scale),
                           float(self.lr_final_ratio))

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 input features, got {X.shape[1]}")
        self.model_, self.loss_trace_ = train(
            SampleSet(X, y), self.encoder_config(), self.train_config(),
            tuple(int(h) for h in self.hidden),
        )
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return forward(self.model_, X)
