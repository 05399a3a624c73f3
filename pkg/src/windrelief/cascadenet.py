"""One-hidden-layer cascade-forward regressor.

    y_hat = W_ho . tanh(W_ih x + b_h) + W_io . x + b_o

The output unit sees the hidden layer and, through the cascade links, the raw
inputs. Parameters are flattened in the canonical order

    W_ih (row-major, n_hidden x n_in), b_h, W_ho, W_io, b_o

which is the layout of ``CascadeNetwork.flat()``, of ``gradients`` and of the
Jacobian used by the Levenberg-Marquardt trainer.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import (
    DivergedLoss,
    EmptyBatch,
    InsufficientData,
    InvalidShape,
    ShapeMismatch,
    TrialFailed,
)

MODEL_SCHEMA_VERSION = 1
MU_MAX = 1e10


@dataclass
class CascadeNetwork:
    W_ih: np.ndarray  # (n_hidden, n_in)
    b_h: np.ndarray  # (n_hidden,)
    W_ho: np.ndarray  # (n_hidden,)
    W_io: np.ndarray  # (n_in,)
    b_o: float

    @property
    def n_in(self) -> int:
        return self.W_io.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.b_h.shape[0]

    @property
    def n_params(self) -> int:
        h, n = self.n_hidden, self.n_in
        return h * n + h + h + n + 1

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W_ih.ravel(), self.b_h, self.W_ho, self.W_io, [self.b_o]])

    @classmethod
    def from_flat(cls, theta, n_in: int, n_hidden: int) -> "CascadeNetwork":
        theta = np.asarray(theta, dtype=float)
        h, n = n_hidden, n_in
        expected = h * n + 2 * h + n + 1
        if theta.shape != (expected,):
            raise InvalidShape(f"expected {expected} parameters, got {theta.shape}")
        i = 0
        W_ih = theta[i:i + h * n].reshape(h, n).copy()
        i += h * n
        b_h = theta[i:i + h].copy()
        i += h
        W_ho = theta[i:i + h].copy()
        i += h
        W_io = theta[i:i + n].copy()
        i += n
        return cls(W_ih, b_h, W_ho, W_io, float(theta[i]))

    def copy(self) -> "CascadeNetwork":
        return CascadeNetwork.from_flat(self.flat(), self.n_in, self.n_hidden)

    def predict(self, X) -> np.ndarray:
        """Vectorized forward pass over the rows of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_in:
            raise ShapeMismatch(f"network expects {self.n_in} inputs, got {X.shape[1]}")
        H = np.tanh(X @ self.W_ih.T + self.b_h)
        return H @ self.W_ho + X @ self.W_io + self.b_o

    def to_dict(self) -> dict:
        return {
            "n_in": self.n_in,
            "n_hidden": self.n_hidden,
            "W_ih": self.W_ih.tolist(),
            "b_h": self.b_h.tolist(),
            "W_ho": self.W_ho.tolist(),
            "W_io": self.W_io.tolist(),
            "b_o": self.b_o,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CascadeNetwork":
        n_in, h = int(d["n_in"]), int(d["n_hidden"])
        return cls(np.asarray(d["W_ih"], dtype=float).reshape(h, n_in),
                   np.asarray(d["b_h"], dtype=float).reshape(h),
                   np.asarray(d["W_ho"], dtype=float).reshape(h),
                   np.asarray(d["W_io"], dtype=float).reshape(n_in),
                   float(d["b_o"]))


def init_network(n_in: int, n_hidden: int, seed=None) -> CascadeNetwork:
    """Uniform [-0.5, 0.5] weights from ``numpy.random.default_rng(seed)``."""
    if n_in < 1 or n_hidden < 0:
        raise InvalidShape(f"need n_in >= 1 and n_hidden >= 0, got ({n_in}, {n_hidden})")
    rng = np.random.default_rng(seed)
    n_params = n_hidden * n_in + 2 * n_hidden + n_in + 1
    return CascadeNetwork.from_flat(rng.uniform(-0.5, 0.5, size=n_params), n_in, n_hidden)


def forward(net: CascadeNetwork, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.n_in,):
        raise ShapeMismatch(f"network expects {net.n_in} inputs, got shape {x.shape}")
    return float(net.predict(x[None, :])[0])


def jacobian(net: CascadeNetwork, X) -> np.ndarray:
    """d y_hat / d theta for every row, shape (rows, n_params)."""
    X = np.asarray(X, dtype=float)
    H = np.tanh(X @ net.W_ih.T + net.b_h)  # (N, h)
    G = (1.0 - H * H) * net.W_ho  # d y_hat / d pre-activation
    N = X.shape[0]
    dW_ih = (G[:, :, None] * X[:, None, :]).reshape(N, -1)
    return np.hstack([dW_ih, G, H, X, np.ones((N, 1))])


def gradients(net: CascadeNetwork, X, y) -> np.ndarray:
    """Gradient of 0.5 * mean squared error, in canonical parameter order."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyBatch("gradient needs a non-empty batch")
    if X.shape[1] != net.n_in or y.shape != (X.shape[0],):
        raise ShapeMismatch(f"batch shapes {X.shape}/{y.shape} do not fit n_in={net.n_in}")
    r = net.predict(X) - y
    return jacobian(net, X).T @ r / X.shape[0]


# --------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    max_epochs: int = 1000
    n_hidden: int = 10
    optimizer: str = "lm"  # "lm" or "gdm" (gradient descent with momentum)
    mu: float = 1e-3
    mu_increase: float = 10.0
    mu_decrease: float = 10.0
    learning_rate: float = 0.05
    momentum: float = 0.9
    validation_fraction: float = 0.15
    patience: int = 6

    def __post_init__(self):
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.optimizer not in ("lm", "gdm"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    train_mse: list[float]
    validation_mse: list[float]
    test_mse: list[float] | None
    best_epoch: int
    stop_reason: str  # "patience" | "max_epochs" | "mu_overflow"
    network: CascadeNetwork
    train_rows: list[int] = field(default_factory=list)
    validation_rows: list[int] = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.train_mse) - 1

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "stop_reason": self.stop_reason,
            "train_mse": self.train_mse,
            "validation_mse": self.validation_mse,
            "test_mse": self.test_mse,
            "train_rows": self.train_rows,
            "validation_rows": self.validation_rows,
        }


def split_validation(n_rows: int, fraction: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle; the first ``round(fraction * n)`` rows become validation."""
    perm = np.random.default_rng(seed).permutation(n_rows)
    n_val = min(max(1, int(round(fraction * n_rows))), n_rows - 1)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _mse(net, X, y) -> float:
    r = net.predict(X) - y
    return float(r @ r) / len(y)


def train(net: CascadeNetwork, X, y, config: TrainConfig = TrainConfig(),
          test: tuple | None = None) -> TrainReport:
    """Fit ``net`` with validation early stopping; returns the best-validation network.

    Epoch 0 records the untrained network. Training stops after
    ``config.patience`` consecutive epochs that fail to improve the best
    validation MSE, at ``max_epochs``, or when Levenberg-Marquardt cannot find
    a descent step before mu exceeds ``MU_MAX``. ``test`` is only recorded.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] < 10:
        raise InsufficientData(f"training needs at least 10 rows, got {X.shape[0] if X.ndim == 2 else 0}")
    if X.shape[1] != net.n_in or y.shape != (X.shape[0],):
        raise ShapeMismatch(f"data shapes {X.shape}/{y.shape} do not fit n_in={net.n_in}")
    tr, va = split_validation(X.shape[0], config.validation_fraction, config.seed)
    Xt, yt, Xv, yv = X[tr], y[tr], X[va], y[va]
    if test is not None:
        Xs, ys = np.asarray(test[0], dtype=float), np.asarray(test[1], dtype=float)

    theta = net.flat().copy()
    shape = (net.n_in, net.n_hidden)
    cur = CascadeNetwork.from_flat(theta, *shape)

    def record(model):
        tm, vm = _mse(model, Xt, yt), _mse(model, Xv, yv)
        if not (math.isfinite(tm) and math.isfinite(vm)):
            raise DivergedLoss(f"non-finite loss at epoch {len(train_hist)}")
        train_hist.append(tm)
        val_hist.append(vm)
        if test is not None:
            test_hist.append(_mse(model, Xs, ys))

    train_hist: list[float] = []
    val_hist: list[float] = []
    test_hist: list[float] = []
    record(cur)
    best_epoch, best_theta, fails = 0, theta.copy(), 0
    mu = config.mu
    velocity = np.zeros_like(theta)
    stop = "max_epochs"

    for epoch in range(1, config.max_epochs + 1):
        if config.optimizer == "lm":
            J = jacobian(cur, Xt)
            r = cur.predict(Xt) - yt
            sse = float(r @ r)
            JtJ, Jtr = J.T @ J, J.T @ r
            eye = np.eye(len(theta))
            while True:
                step = np.linalg.solve(JtJ + mu * eye, -Jtr)
                cand = CascadeNetwork.from_flat(theta + step, *shape)
                rc = cand.predict(Xt) - yt
                if float(rc @ rc) < sse:
                    theta = theta + step
                    cur = cand
                    mu = mu / config.mu_decrease
                    break
                mu = mu * config.mu_increase
                if mu > MU_MAX:
                    break
            if mu > MU_MAX:
                stop = "mu_overflow"
                break
        else:
            g = jacobian(cur, Xt).T @ (cur.predict(Xt) - yt) / len(yt)
            velocity = config.momentum * velocity - config.learning_rate * g
            theta = theta + velocity
            cur = CascadeNetwork.from_flat(theta, *shape)

        record(cur)
        if val_hist[-1] < val_hist[best_epoch]:
            best_epoch, best_theta, fails = epoch, theta.copy(), 0
        else:
            fails += 1
            if fails >= config.patience:
                stop = "patience"
                break

    return TrainReport(train_hist, val_hist, test_hist if test is not None else None,
                       best_epoch, stop, CascadeNetwork.from_flat(best_theta, *shape),
                       tr.tolist(), va.tolist())


# --------------------------------------------------------------------------
# hidden-size sensitivity


@dataclass(frozen=True)
class SweepRow:
    n_hidden: int
    seed: int
    mape: float
    best_epoch: int
    selected: bool = False


def trial_seed(seed: int, n_hidden: int) -> int:
    return int(np.random.SeedSequence([seed, n_hidden]).generate_state(1)[0])


def _mape(pred, actual) -> float:
    mask = actual != 0
    return float(100.0 * np.mean(np.abs(pred[mask] - actual[mask]) / np.abs(actual[mask])))


def sensitivity_sweep(base_hidden: int, delta: int, X_train, y_train, X_test, y_test,
                      config: TrainConfig = TrainConfig(), target_inverse=None,
                      workers: int = 1) -> list[SweepRow]:
    """Retrain for every hidden size in ``base_hidden +/- delta`` and score test MAPE.

    ``target_inverse`` maps scaled predictions/targets back to physical units
    before MAPE is taken. Trials run on ``workers`` threads; rows come back in
    ``n_hidden`` order with the lowest-MAPE row flagged ``selected``.
    """
    if delta < 0 or base_hidden - delta < 0:
        raise ValueError("need delta >= 0 and base_hidden - delta >= 0")
    inv = target_inverse or (lambda v: np.asarray(v, dtype=float))
    X_train = np.asarray(X_train, dtype=float)
    X_test = np.asarray(X_test, dtype=float)
    actual = inv(np.asarray(y_test, dtype=float))

    def run(h):
        s = trial_seed(config.seed, h)
        cfg = replace(config, n_hidden=h, seed=s)
        try:
            rep = train(init_network(X_train.shape[1], h, s), X_train, y_train, cfg)
        except Exception as exc:
            raise TrialFailed(h, exc) from exc
        return SweepRow(h, s, _mape(inv(rep.network.predict(X_test)), actual), rep.best_epoch)

    sizes = list(range(base_hidden - delta, base_hidden + delta + 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, sizes))
    else:
        rows = [run(h) for h in sizes]
    best = min(range(len(rows)), key=lambda i: (rows[i].mape, i))
    return [replace(r, selected=(i == best)) for i, r in enumerate(rows)]


# --------------------------------------------------------------------------
# model files


def model_to_json(net: CascadeNetwork, *, feature_names, normalization: dict,
                  config: TrainConfig, extra: dict | None = None) -> str:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": "cascade_forward_network",
        "feature_names": list(feature_names),
        "network": net.to_dict(),
        "normalization": normalization,
        "train_config": config.to_dict(),
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)


def model_from_json(text: str) -> tuple[CascadeNetwork, dict]:
    doc = json.loads(text)
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema_version {doc.get('schema_version')!r}")
    return CascadeNetwork.from_dict(doc["network"]), doc
