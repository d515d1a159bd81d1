"""Small feedforward regressors trained with Adam, in NumPy.

Each network maps ten normalized inputs through a sigmoid layer and a
leaky-rectifier layer to one output. Training uses mini-batches, dropout
after each hidden layer, and a plateau learning-rate scheduler with a
reset once the rate becomes negligible.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigurationError, InputError, NumericalError

FEATURES = ["G_POA", "T_amb", "T_cell", "hour", "month", "k", "I_DC", "V_DC", "P_DC", "P_AC"]
TARGET_WIDTHS = {"I_L": 12, "I_sc": 6, "V_oc": 12, "eta_cell": 15, "eta_inv": 15}
LEAKY_SLOPE = 0.01
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
TRAIN_FRACTION = 0.85
# optimizer updates per epoch of the full-scale regime: 2 039 040 samples,
# 80% per cross-validation fold, 85% of that for training, batches of 5000
FULL_SCALE_UPDATES = int(np.ceil(2_039_040 * 0.8 * TRAIN_FRACTION / 5000))


@dataclass(frozen=True)
class NetworkConfig:
    neurons: int = 12
    n_inputs: int = len(FEATURES)
    dropout: float = 0.2
    epochs: int = 50
    batch_size: int | str = 5000
    lr: float = 0.1
    lr_factor: float = 0.1
    lr_patience: int = 5
    lr_min_delta: float = 1e-4
    lr_reset_floor: float = 1e-7
    lr_reset_value: float = 0.01

    def __post_init__(self):
        if self.neurons < 1 or self.n_inputs < 1:
            raise ConfigurationError("network dimensions must be positive")
        if not 0 <= self.dropout < 1:
            raise ConfigurationError("dropout must lie in [0, 1)")
        if self.batch_size != "auto" and not (isinstance(self.batch_size, int)
                                              and self.batch_size >= 1):
            raise ConfigurationError("batch_size must be a positive integer or 'auto'")
        if self.epochs < 1 or not self.lr > 0:
            raise ConfigurationError("epochs and lr must be positive")

    def resolve_batch(self, n_train):
        """Batch size for ``n_train`` rows; ``'auto'`` keeps the full-scale update count."""
        if self.batch_size == "auto":
            return max(1, int(np.ceil(n_train / FULL_SCALE_UPDATES)))
        return self.batch_size


@dataclass
class Normalizer:
    """Column-wise min-max scaling fitted on training data."""

    min: np.ndarray
    max: np.ndarray

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        return cls(x.min(axis=0), x.max(axis=0))

    @property
    def span(self):
        return self.max - self.min

    def transform(self, x):
        x = np.asarray(x, dtype=float)
        s = self.span
        safe = np.where(s > 0, s, 1.0)
        return np.where(s > 0, (x - self.min) / safe, 0.0)

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self.span + self.min


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def leaky_relu(z, slope=LEAKY_SLOPE):
    return np.where(z > 0, z, slope * z)


@dataclass
class MLP:
    """Weights ``W[l]`` have shape (fan_in, fan_out); layers apply ``x @ W + b``."""

    W: list
    b: list

    @classmethod
    def init(cls, n_inputs, neurons, rng):
        sizes = [n_inputs, neurons, neurons, 1]
        W = [rng.normal(0.0, np.sqrt(2.0 / sizes[i]), (sizes[i], sizes[i + 1]))
             for i in range(3)]
        b = [np.zeros(sizes[i + 1]) for i in range(3)]
        return cls(W, b)

    @property
    def sizes(self):
        return [self.W[0].shape[0]] + [w.shape[1] for w in self.W]

    def params(self):
        return self.W + self.b

    def copy(self):
        return MLP([w.copy() for w in self.W], [v.copy() for v in self.b])


def forward(net: MLP, x, dropout=0.0, rng=None, cache=False):
    """Network output for a batch ``x`` of shape (n, n_inputs).

    Dropout (inverted scaling) is applied only when ``dropout > 0`` and a
    generator is supplied.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != net.W[0].shape[0]:
        raise ConfigurationError(f"expected {net.W[0].shape[0]} inputs, got {x.shape[1]}")
    masks = [None, None]
    z1 = x @ net.W[0] + net.b[0]
    h1 = sigmoid(z1)
    if dropout > 0 and rng is not None:
        masks[0] = (rng.random(h1.shape) >= dropout) / (1.0 - dropout)
        h1 = h1 * masks[0]
    z2 = h1 @ net.W[1] + net.b[1]
    h2 = leaky_relu(z2)
    if dropout > 0 and rng is not None:
        masks[1] = (rng.random(h2.shape) >= dropout) / (1.0 - dropout)
        h2 = h2 * masks[1]
    y = (h2 @ net.W[2] + net.b[2])[:, 0]
    if cache:
        return y, (x, z1, h1, z2, h2, masks)
    return y


def loss_and_grads(net: MLP, x, t, dropout=0.0, rng=None):
    """Mean squared error and its gradients in ``net.params()`` order."""
    t = np.asarray(t, dtype=float)
    y, (x, z1, h1, z2, h2, masks) = forward(net, x, dropout, rng, cache=True)
    n = y.size
    err = y - t
    loss = float(np.mean(err ** 2))
    dy = (2.0 / n) * err[:, None]
    gW3 = h2.T @ dy
    gb3 = dy.sum(axis=0)
    dh2 = dy @ net.W[2].T
    if masks[1] is not None:
        dh2 = dh2 * masks[1]
    dz2 = dh2 * np.where(z2 > 0, 1.0, LEAKY_SLOPE)
    gW2 = h1.T @ dz2
    gb2 = dz2.sum(axis=0)
    dh1 = dz2 @ net.W[1].T
    if masks[0] is not None:
        dh1 = dh1 * masks[0]
    s = sigmoid(z1)
    dz1 = dh1 * s * (1.0 - s)
    gW1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return loss, [gW1, gW2, gW3, gb1, gb2, gb3]


class Adam:
    def __init__(self, params, lr):
        self.lr = lr
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        b1, b2 = ADAM_BETAS
        self.t += 1
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


class PlateauScheduler:
    """Cut the rate after ``patience`` stagnant epochs; reset when negligible."""

    def __init__(self, cfg: NetworkConfig):
        self.cfg = cfg
        self.lr = cfg.lr
        self.best = np.inf
        self.stagnant = 0

    def update(self, val_loss):
        cfg = self.cfg
        if val_loss < self.best * (1.0 - cfg.lr_min_delta):
            self.best = val_loss
            self.stagnant = 0
        else:
            self.stagnant += 1
        if self.stagnant >= cfg.lr_patience:
            self.lr *= cfg.lr_factor
            self.stagnant = 0
            if self.lr <= cfg.lr_reset_floor * (1.0 + 1e-9):
                self.lr = cfg.lr_reset_value
        return self.lr


@dataclass
class TrainedModel:
    net: MLP
    x_norm: Normalizer
    y_norm: Normalizer
    cfg: NetworkConfig
    history: pd.DataFrame
    target: str = ""
    features: list = field(default_factory=lambda: list(FEATURES))

    def predict(self, X):
        z = forward(self.net, self.x_norm.transform(X))
        return self.y_norm.inverse(z[:, None])[:, 0]

    def to_json(self):
        doc = {
            "format": "pvtwin-mlp-1",
            "target": self.target,
            "features": self.features,
            "layers": self.net.sizes,
            "activations": ["sigmoid", "leaky_relu", "linear"],
            "leaky_slope": LEAKY_SLOPE,
            "weights": [w.tolist() for w in self.net.W],
            "biases": [v.tolist() for v in self.net.b],
            "normalizer": {"x_min": self.x_norm.min.tolist(), "x_max": self.x_norm.max.tolist(),
                           "y_min": self.y_norm.min.tolist(), "y_max": self.y_norm.max.tolist()},
            "config": asdict(self.cfg),
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        net = MLP([np.asarray(w, dtype=float) for w in doc["weights"]],
                  [np.asarray(v, dtype=float) for v in doc["biases"]])
        nz = doc["normalizer"]
        return cls(net, Normalizer(np.asarray(nz["x_min"]), np.asarray(nz["x_max"])),
                   Normalizer(np.asarray(nz["y_min"]), np.asarray(nz["y_max"])),
                   NetworkConfig(**doc["config"]), pd.DataFrame(), doc["target"], doc["features"])


def feature_matrix(df: pd.DataFrame):
    """The ten model inputs; hour and month are pre-scaled by 24 and 12."""
    idx = pd.DatetimeIndex(df.index)
    cols = []
    for name in FEATURES:
        if name == "hour":
            cols.append((idx.hour + idx.minute / 60.0) / 24.0)
        elif name == "month":
            cols.append(idx.month / 12.0)
        else:
            cols.append(df[name].to_numpy(dtype=float))
    return np.column_stack(cols)


def train(X, y, cfg: NetworkConfig, seed, target=""):
    """Fit one network on an 85/15 train/validation split.

    Normalizers are fitted on the training rows only. Returns a
    :class:`TrainedModel` whose ``history`` holds per-epoch training and
    validation loss (normalized units) and the learning rate in use.

    Raises
    ------
    NumericalError
        When a loss becomes non-finite.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != cfg.n_inputs:
        raise ConfigurationError(f"expected input shape (n, {cfg.n_inputs}), got {X.shape}")
    if len(X) != len(y) or len(X) < 2:
        raise InputError("need at least two aligned samples")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(X))
    n_tr = max(1, min(len(X) - 1, int(round(TRAIN_FRACTION * len(X)))))
    tr, va = perm[:n_tr], perm[n_tr:]
    x_norm = Normalizer.fit(X[tr])
    y_norm = Normalizer.fit(y[tr])
    Xtr, Xva = x_norm.transform(X[tr]), x_norm.transform(X[va])
    ytr = y_norm.transform(y[tr][:, None])[:, 0]
    yva = y_norm.transform(y[va][:, None])[:, 0]
    net = MLP.init(cfg.n_inputs, cfg.neurons, rng)
    params = net.params()
    opt = Adam(params, cfg.lr)
    sched = PlateauScheduler(cfg)
    rows = []
    batch = cfg.resolve_batch(n_tr)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_tr)
        batch_losses = []
        lr = sched.lr
        opt.lr = lr
        for s in range(0, n_tr, batch):
            b = order[s:s + batch]
            loss, grads = loss_and_grads(net, Xtr[b], ytr[b], cfg.dropout, rng)
            if not np.isfinite(loss):
                raise NumericalError("non-finite training loss", epoch=epoch, batch=s // batch,
                                     lr=lr)
            opt.step(params, grads)
            batch_losses.append(loss * len(b))
        train_loss = float(np.sum(batch_losses) / n_tr)
        val_loss = float(np.mean((forward(net, Xva) - yva) ** 2))
        if not np.isfinite(val_loss):
            raise NumericalError("non-finite validation loss", epoch=epoch, lr=lr)
        rows.append((epoch + 1, train_loss, val_loss, lr))
        sched.update(val_loss)
    hist = pd.DataFrame(rows, columns=["epoch", "train_loss", "val_loss", "lr"])
    return TrainedModel(net, x_norm, y_norm, cfg, hist, target)


def metrics(y_measured, y_modeled):
    """RMSE, R2, MAPE, MeAPE and the APE series.

    APE is undefined where the measurement is zero; those samples are
    left out of MAPE/MeAPE and counted in ``n_excluded``. R2 is NaN for a
    constant measured series.
    """
    m = np.asarray(y_measured, dtype=float)
    p = np.asarray(y_modeled, dtype=float)
    if m.size == 0:
        raise InputError("metrics need at least one sample")
    if m.shape != p.shape:
        raise InputError("measured and modeled lengths differ")
    err = m - p
    rmse = float(np.sqrt(np.mean(err ** 2)))
    ss_tot = float(np.sum((m - m.mean()) ** 2))
    r2 = 1.0 - float(np.sum(err ** 2)) / ss_tot if ss_tot > 0 else float("nan")
    nz = m != 0
    ape = np.full(m.shape, np.nan)
    ape[nz] = np.abs(err[nz] / m[nz]) * 100.0
    valid = ape[nz]
    return {
        "RMSE": rmse, "R2": r2,
        "MAPE": float(np.mean(valid)) if valid.size else float("nan"),
        "MeAPE": float(np.median(valid)) if valid.size else float("nan"),
        "APE": ape, "n_excluded": int((~nz).sum()),
    }


@dataclass
class CVReport:
    folds: list
    fold_metrics: list
    models: list = field(default_factory=list, repr=False)

    def mean(self, key):
        v = np.array([f[key] for f in self.fold_metrics], dtype=float)
        return float(np.mean(v[np.isfinite(v)])) if np.isfinite(v).any() else float("nan")

    def to_dict(self):
        return {
            "folds": [{"n_test": int(len(f)), **{k: m[k] for k in ("RMSE", "R2", "MAPE", "MeAPE")}}
                      for f, m in zip(self.folds, self.fold_metrics)],
            "mean": {k: self.mean(k) for k in ("RMSE", "R2", "MAPE", "MeAPE")},
        }


def fold_indices(n, k, seed):
    """Shuffled partition of ``range(n)`` into ``k`` near-equal test folds."""
    if n < k:
        raise InputError(f"need at least {k} samples for {k}-fold CV")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def kfold_cv(X, y, cfg: NetworkConfig, seed, k=5, target=""):
    """K-fold cross-validation; each fold trains on the rest and tests on itself."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    folds = fold_indices(len(X), k, seed)
    seeds = np.random.SeedSequence(seed).spawn(k)
    out, models = [], []
    for i, test in enumerate(folds):
        mask = np.ones(len(X), dtype=bool)
        mask[test] = False
        fold_seed = int(seeds[i].generate_state(1)[0])
        model = train(X[mask], y[mask], cfg, fold_seed, target)
        m = metrics(y[test], model.predict(X[test]))
        m.pop("APE")
        out.append(m)
        models.append(model)
    return CVReport(folds, out, models)
