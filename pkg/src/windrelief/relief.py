"""Relief-family attribute estimators.

All three estimators share the same conventions:

* ``diff(A, x1, x2) = |x1[A] - x2[A]| / (max[A] - min[A])``, 0 on constant columns;
* neighbor distance is the sum of diffs over all attributes (Manhattan);
* distance ties go to the lower row index and an instance is never its own
  neighbor;
* ``m="all"`` visits every row once in row order, an integer ``m`` draws
  ``m`` rows with replacement from ``numpy.random.default_rng(seed)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import FeatureMatrix, NormalizationParams, fit_normalization
from .errors import IndexOutOfRange, InsufficientData, SingleClass, ZeroTargetRange

DEFAULT_SIGMA = 20.0


@dataclass(frozen=True)
class FeatureWeights:
    weights: np.ndarray
    method: str
    k: int | None
    m: int | str
    seed: int | None
    feature_names: tuple[str, ...] | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "weights": [float(w) for w in self.weights],
            "k": self.k,
            "m": self.m,
            "seed": self.seed,
        }
        if self.feature_names is not None:
            d["feature_names"] = list(self.feature_names)
        d.update(self.extra)
        return d


@dataclass(frozen=True)
class RankResult:
    order: tuple[int, ...]  # feature indices, most relevant first
    ranks: tuple[int, ...]  # rank per feature index, 1 = most relevant
    weights: tuple[float, ...]
    feature_names: tuple[str, ...] | None = None

    def top(self, n: int) -> list:
        """Indices (or names, when known) of the ``n`` best features."""
        idx = list(self.order[:n])
        if self.feature_names is None:
            return idx
        return [self.feature_names[i] for i in idx]

    def to_dict(self) -> dict:
        d = {"order": list(self.order), "ranks": list(self.ranks),
             "weights": list(self.weights)}
        if self.feature_names is not None:
            d["feature_names"] = list(self.feature_names)
            d["ranked_names"] = self.top(len(self.order))
        return d


def feature_diff(feature: int, x1, x2, params: NormalizationParams) -> float:
    """Range-normalized absolute difference of one attribute, in [0, 1]."""
    n = len(params.feature_min)
    if not 0 <= feature < n:
        raise IndexOutOfRange(f"feature index {feature} outside 0..{n - 1}")
    if feature in params.constant_columns:
        return 0.0
    span = params.feature_max[feature] - params.feature_min[feature]
    if span == 0:
        return 0.0
    return abs(float(x1[feature]) - float(x2[feature])) / float(span)


def _as_array(matrix) -> tuple[np.ndarray, tuple[str, ...] | None]:
    if isinstance(matrix, FeatureMatrix):
        return np.asarray(matrix.X, dtype=float), matrix.feature_names
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    return X, None


class _Diffs:
    """Row-vs-all diff matrices and neighbor orderings for one dataset."""

    def __init__(self, X: np.ndarray, params: NormalizationParams | None):
        self.X = X
        params = params or fit_normalization(X)
        span = params.feature_range.astype(float)
        self.live = span > 0
        if params.constant_columns:
            self.live[list(params.constant_columns)] = False
        self.span = np.where(self.live, span, 1.0)

    def rows(self, i: int) -> np.ndarray:
        d = np.abs(self.X - self.X[i]) / self.span
        d[:, ~self.live] = 0.0
        return d

    @staticmethod
    def neighbor_order(d: np.ndarray, i: int) -> np.ndarray:
        order = np.argsort(d.sum(axis=1), kind="stable")
        return order[order != i]


def _sample(n: int, m, seed) -> np.ndarray:
    if m is None or m == "all":
        return np.arange(n)
    m = int(m)
    if m < 1:
        raise ValueError("m must be positive or 'all'")
    return np.random.default_rng(seed).integers(0, n, size=m)


def _check_labels(X, labels) -> np.ndarray:
    labels = np.asarray(labels)
    if X.shape[0] < 2:
        raise InsufficientData(f"need at least 2 instances, got {X.shape[0]}")
    if labels.shape != (X.shape[0],):
        raise ValueError("labels must have one entry per row")
    if len(np.unique(labels)) < 2:
        raise SingleClass("labels contain a single class; Relief needs hits and misses")
    return labels


def relief_weights(matrix, labels, m="all", seed=None,
                   params: NormalizationParams | None = None) -> FeatureWeights:
    """Kira-Rendell Relief: one nearest hit and one nearest miss per sampled row."""
    X, names = _as_array(matrix)
    labels = _check_labels(X, labels)
    diffs = _Diffs(X, params)
    sample = _sample(X.shape[0], m, seed)
    m_eff = len(sample)
    W = np.zeros(X.shape[1])
    for i in sample:
        d = diffs.rows(i)
        order = diffs.neighbor_order(d, i)
        same = labels[order] == labels[i]
        hits, misses = order[same], order[~same]
        dH = d[hits[0]] if len(hits) else np.zeros(X.shape[1])
        dM = d[misses[0]]
        W += (dM - dH) / m_eff
    return FeatureWeights(W, "relief", 1, m, seed, names)


def relieff_weights(matrix, labels, k: int = 10, m="all", seed=None,
                    params: NormalizationParams | None = None) -> FeatureWeights:
    """Kononenko's ReliefF: diffs averaged over k nearest hits and k nearest
    misses per other class, the misses weighted by class prior."""
    if k < 1:
        raise ValueError("k must be >= 1")
    X, names = _as_array(matrix)
    labels = _check_labels(X, labels)
    n = X.shape[0]
    classes, counts = np.unique(labels, return_counts=True)
    count_of = dict(zip(classes.tolist(), counts.tolist()))

    if k > int(counts.min()) - 1:
        warnings.warn(f"k={k} exceeds available neighbors; hit sets clamped to class size - 1 "
                      f"(smallest class has {int(counts.min())} rows)", stacklevel=2)

    diffs = _Diffs(X, params)
    sample = _sample(n, m, seed)
    m_eff = len(sample)
    W = np.zeros(X.shape[1])
    for i in sample:
        d = diffs.rows(i)
        order = diffs.neighbor_order(d, i)
        cls = labels[i].item()
        lab = labels[order]
        hits = order[lab == cls][:k]
        dH = d[hits].mean(axis=0) if len(hits) else np.zeros(X.shape[1])
        dM = None
        for c in classes.tolist():
            if c == cls:
                continue
            miss = order[lab == c][:k]
            term = (count_of[c] / (n - count_of[cls])) * d[miss].mean(axis=0)
            dM = term if dM is None else dM + term
        W += (dM - dH) / m_eff
    return FeatureWeights(W, "relieff", k, m, seed, names)


def rank_kernel(k: int, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Normalized neighbor influence exp(-(rank/sigma)^2) for ranks 1..k."""
    r = np.arange(1, k + 1, dtype=float)
    w = np.exp(-((r / sigma) ** 2))
    return w / w.sum()


def rrelieff_weights(matrix, targets, k: int = 10, m="all", seed=None,
                     params: NormalizationParams | None = None,
                     sigma: float = DEFAULT_SIGMA) -> FeatureWeights:
    """Regression ReliefF (RReliefF) for a continuous target.

    Accumulates, over sampled instances and their k rank-weighted nearest
    neighbors, the probability of a different target (``N_dC``), of a
    different attribute value (``N_dA``) and of both (``N_dCdA``)::

        W[A] = N_dCdA[A] / N_dC - (N_dA[A] - N_dCdA[A]) / (m - N_dC)

    A term whose denominator is zero contributes 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    X, names = _as_array(matrix)
    if isinstance(matrix, FeatureMatrix) and targets is None:
        targets = matrix.y
    y = np.asarray(targets, dtype=float)
    n = X.shape[0]
    if y.shape != (n,):
        raise ValueError("targets must have one entry per row")
    if n < k + 1:
        raise InsufficientData(f"need at least k+1={k + 1} instances, got {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    y_span = float(y.max() - y.min())
    if y_span == 0:
        raise ZeroTargetRange("all targets are equal; target diff is undefined")

    diffs = _Diffs(X, params)
    kernel = rank_kernel(k, sigma)
    sample = _sample(n, m, seed)
    m_eff = len(sample)
    n_dc = 0.0
    n_da = np.zeros(X.shape[1])
    n_dcda = np.zeros(X.shape[1])
    for i in sample:
        d = diffs.rows(i)
        near = diffs.neighbor_order(d, i)[:k]
        dy = np.abs(y[near] - y[i]) / y_span
        dA = d[near]
        n_dc += float(dy @ kernel)
        n_da += kernel @ dA
        n_dcda += (kernel * dy) @ dA
    first = n_dcda / n_dc if n_dc > 0 else np.zeros_like(n_da)
    rest = m_eff - n_dc
    second = (n_da - n_dcda) / rest if rest > 0 else np.zeros_like(n_da)
    W = first - second
    return FeatureWeights(W, "rrelieff", k, m, seed, names,
                          {"sigma": sigma, "n_dc": n_dc, "m_eff": m_eff})


def rank_features(weights, feature_names: Sequence[str] | None = None) -> RankResult:
    """Descending-weight ranking; equal weights keep lower column index first."""
    if isinstance(weights, FeatureWeights):
        feature_names = feature_names or weights.feature_names
        w = np.asarray(weights.weights, dtype=float)
    else:
        w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) == 0:
        raise ValueError("need at least one weight")
    order = np.argsort(-w, kind="stable")
    ranks = np.empty(len(w), dtype=int)
    ranks[order] = np.arange(1, len(w) + 1)
    names = tuple(feature_names) if feature_names is not None else None
    return RankResult(tuple(int(i) for i in order), tuple(int(r) for r in ranks),
                      tuple(float(x) for x in w), names)

