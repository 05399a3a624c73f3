"""Wind power conversion and simple forecasting baselines."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import BadWindow, EmptySeries, InsufficientData, NegativeSpeed

AIR_DENSITY = 1.225  # kg/m^3, sea-level standard
RANK_TOL = 1e-10  # relative singular-value cutoff


@dataclass(frozen=True)
class PowerSpec:
    rho: float = AIR_DENSITY
    area: float = 1.0

    def __post_init__(self):
        if not self.rho > 0 or not self.area > 0:
            raise ValueError("rho and area must be positive")


def wind_power(spec: PowerSpec, v):
    """Kinetic power 0.5 * rho * A * v**3 in watts; accepts scalars or arrays."""
    arr = np.asarray(v, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise NegativeSpeed(f"wind speed must be non-negative, got {v!r}")
    p = 0.5 * spec.rho * spec.area * arr ** 3
    return float(p) if p.ndim == 0 else p


def persistence_forecast(series, horizon: int = 1) -> np.ndarray:
    s = np.asarray(series, dtype=float)
    if s.size == 0:
        raise EmptySeries("persistence needs at least one observation")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return np.full(horizon, s[-1])


@dataclass(frozen=True)
class LagModel:
    """WS[t+1] = a1 * WS[t] + a2 * WS[t-1] + c."""

    a1: float
    a2: float
    c: float
    residual_mse: float
    order: int = 2

    def step(self, older: float, newer: float) -> float:
        return self.a1 * newer + self.a2 * older + self.c

    def to_dict(self) -> dict:
        return asdict(self)


def lag_design(series) -> tuple[np.ndarray, np.ndarray]:
    """Regressor rows [WS[t], WS[t-1]] and targets WS[t+1] for t = 1..n-2."""
    s = np.asarray(series, dtype=float)
    return np.column_stack([s[1:-1], s[:-2]]), s[2:]


def fit_lag_model(series) -> LagModel:
    """Least-squares fit of the two-lag linear recurrence.

    A constant lag history carries no slope information: slopes are 0 and the
    intercept is the mean. Otherwise the least-squares problem is solved by
    SVD; when the design is rank-deficient (any noise-free series obeying a
    recurrence with a unit root is) the solution with the smallest |c| is
    chosen, then the smallest slope norm.
    """
    s = np.asarray(series, dtype=float)
    if s.size < 4:
        raise InsufficientData(f"lag model needs at least 4 observations, got {s.size}")
    X, y = lag_design(s)
    if np.ptp(X[:, 0]) == 0 and np.ptp(X[:, 1]) == 0:
        beta = np.array([0.0, 0.0, y.mean()])
    else:
        A = np.column_stack([X, np.ones(len(y))])
        U, sv, Vt = np.linalg.svd(A, full_matrices=False)
        keep = sv > RANK_TOL * sv[0]
        beta = Vt[keep].T @ ((U[:, keep].T @ y) / sv[keep])
        null = Vt[~keep]
        if len(null):
            # shift along the null space to zero the intercept where possible
            nc = null[:, 2]
            if np.any(np.abs(nc) > RANK_TOL):
                z = nc * (-beta[2] / (nc @ nc))
                beta = beta + null.T @ z
    resid = y - (X @ beta[:2] + beta[2])
    return LagModel(float(beta[0]), float(beta[1]), float(beta[2]), float(np.mean(resid ** 2)))


def lag_predict(model: LagModel, window, horizon: int = 1) -> np.ndarray:
    """Recursive multi-step rollout from ``window = [older, newer]``."""
    w = [float(v) for v in np.asarray(window, dtype=float).ravel()]
    if len(w) != model.order:
        raise BadWindow(f"window needs {model.order} observations, got {len(w)}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    out = []
    older, newer = w
    for _ in range(horizon):
        nxt = model.step(older, newer)
        out.append(nxt)
        older, newer = newer, nxt
    return np.array(out)
