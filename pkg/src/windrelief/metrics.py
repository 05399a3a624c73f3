"""Error statistics and error histograms for wind-speed predictions (m/s)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyInput, LengthMismatch, NonFiniteInput

NMSE_CONVENTION = "mse / population variance of actual"
NRMSE_CONVENTION = "rmse / (max - min) of actual"


@dataclass(frozen=True)
class EvaluationReport:
    rmse: float
    mae: float
    mse: float
    mape: float | None  # percent; None when every actual is zero
    nmse: float | None  # None when actual has zero variance
    nrmse: float | None  # None when actual has zero range
    n: int
    mape_skipped: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["nmse_convention"] = NMSE_CONVENTION
        d["nrmse_convention"] = NRMSE_CONVENTION
        return d


@dataclass(frozen=True)
class ErrorHistogram:
    edges: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    def to_dict(self) -> dict:
        return {"n_bins": self.n_bins, "edges": list(self.edges), "counts": list(self.counts)}

    def render(self, width: int = 40) -> str:
        """Plain-text bar chart, one line per bin."""
        top = max(self.counts) or 1
        lines = []
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            bar = "#" * round(width * c / top)
            lines.append(f"[{lo:9.4f}, {hi:9.4f}) {c:6d} {bar}")
        return "\n".join(lines)


def _series(predicted, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if len(p) != len(a):
        raise LengthMismatch(f"predicted has {len(p)} values, actual has {len(a)}")
    if len(a) == 0:
        raise EmptyInput("no samples to score")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise NonFiniteInput("series contain non-finite values")
    return p, a


def compute_metrics(predicted, actual) -> EvaluationReport:
    p, a = _series(predicted, actual)
    e = p - a
    mse = float(np.mean(e * e))
    rmse = math.sqrt(mse)
    mae = float(np.mean(np.abs(e)))
    nz = a != 0
    skipped = int(np.count_nonzero(~nz))
    mape = float(100.0 * np.mean(np.abs(e[nz]) / np.abs(a[nz]))) if nz.any() else None
    var = float(np.var(a))
    span = float(a.max() - a.min())
    return EvaluationReport(
        rmse=rmse,
        mae=mae,
        mse=mse,
        mape=mape,
        nmse=mse / var if var > 0 else None,
        nrmse=rmse / span if span > 0 else None,
        n=len(a),
        mape_skipped=skipped,
    )


def error_histogram(errors, n_bins: int = 20) -> ErrorHistogram:
    """Equal-width bins over [min, max]; the maximum falls in the last bin.

    When every error is identical a single unit-width bin centred on the value
    holds all samples.
    """
    e = np.asarray(errors, dtype=float).ravel()
    if len(e) == 0:
        raise EmptyInput("no errors to bin")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if not np.all(np.isfinite(e)):
        raise NonFiniteInput("errors contain non-finite values")
    lo, hi = float(e.min()), float(e.max())
    if lo == hi:
        return ErrorHistogram((lo - 0.5, lo + 0.5), (len(e),))
    counts, edges = np.histogram(e, bins=n_bins, range=(lo, hi))
    return ErrorHistogram(tuple(float(x) for x in edges), tuple(int(c) for c in counts))
