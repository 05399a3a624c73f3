"""Site tables, feature matrices and min-max scaling.

The canonical input is a CSV with one row per site-month::

    site,state,role,latitude,longitude,elevation,month,solar_radiation,
    air_temperature,relative_humidity,atmospheric_pressure,
    earth_temperature,wind_speed

Rows of the same site must be contiguous or at least share the
``(site, state)`` key; each site needs all twelve months exactly once.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    IncompleteSite,
    MissingHeader,
    NonFiniteInput,
    RangeViolation,
    UnknownRole,
)

CSV_HEADER = (
    "site",
    "state",
    "role",
    "latitude",
    "longitude",
    "elevation",
    "month",
    "solar_radiation",
    "air_temperature",
    "relative_humidity",
    "atmospheric_pressure",
    "earth_temperature",
    "wind_speed",
)

# Column order of the feature matrix. Index 5 is atmospheric pressure.
FEATURE_NAMES = (
    "solar_radiation",
    "air_temperature",
    "relative_humidity",
    "latitude",
    "longitude",
    "atmospheric_pressure",
    "earth_temperature",
    "elevation",
)

TARGET_NAME = "wind_speed"


class Role(str, Enum):
    TRAINING = "Training"
    TESTING = "Testing"

    @classmethod
    def parse(cls, text: str) -> "Role":
        norm = text.strip().lower()
        for role in cls:
            if role.value.lower() == norm:
                return role
        raise UnknownRole(f"unknown role {text!r}; expected Training or Testing")


@dataclass(frozen=True)
class MonthlyObservation:
    month: int
    solar_radiation: float  # W/m^2
    air_temperature: float  # degC
    relative_humidity: float  # %
    atmospheric_pressure: float  # kPa
    earth_temperature: float  # degC
    wind_speed: float  # m/s; NaN when unknown (prediction inputs)

    def __post_init__(self):
        _check_observation(self)


def _check_observation(obs: MonthlyObservation, where: str = "") -> None:
    def bad(name, why):
        raise RangeViolation(f"{where}{name}={getattr(obs, name)!r} {why}", field=name)

    if not (isinstance(obs.month, int) and 1 <= obs.month <= 12):
        bad("month", "must be an integer in 1..12")
    for name in ("solar_radiation", "air_temperature", "relative_humidity",
                 "atmospheric_pressure", "earth_temperature"):
        if not math.isfinite(getattr(obs, name)):
            bad(name, "is not finite")
    if not 0.0 <= obs.relative_humidity <= 100.0:
        bad("relative_humidity", "outside [0, 100]")
    if obs.solar_radiation < 0:
        bad("solar_radiation", "is negative")
    if obs.atmospheric_pressure <= 0:
        bad("atmospheric_pressure", "must be positive")
    if math.isinf(obs.wind_speed) or obs.wind_speed < 0:
        bad("wind_speed", "must be finite and non-negative")


@dataclass(frozen=True)
class SiteRecord:
    name: str
    state: str
    latitude: float
    longitude: float
    elevation: float
    role: Role
    months: tuple[MonthlyObservation, ...]

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise RangeViolation(f"site {self.name!r}: latitude {self.latitude} outside [-90, 90]",
                                 field="latitude")
        if not -180.0 <= self.longitude <= 180.0:
            raise RangeViolation(f"site {self.name!r}: longitude {self.longitude} outside [-180, 180]",
                                 field="longitude")
        if not math.isfinite(self.elevation):
            raise RangeViolation(f"site {self.name!r}: elevation is not finite", field="elevation")
        if not isinstance(self.role, Role):
            object.__setattr__(self, "role", Role.parse(str(self.role)))
        months = sorted(m.month for m in self.months)
        if months != list(range(1, 13)):
            raise IncompleteSite(
                f"site {self.name!r} has months {months}; need 1..12 exactly once")
        object.__setattr__(self, "months", tuple(sorted(self.months, key=lambda m: m.month)))


@dataclass(frozen=True)
class FeatureMatrix:
    X: np.ndarray  # (rows, 8) in FEATURE_NAMES order
    y: np.ndarray  # (rows,)
    row_origin: tuple[tuple[int, int], ...]  # (site index, month)
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise ValueError(f"X must have {len(self.feature_names)} columns, got {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("target length must equal row count")
        self.X.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        """Return a matrix restricted to ``names`` (in the order given)."""
        idx = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(self.X[:, idx].copy(), self.y.copy(), self.row_origin, tuple(names))


@dataclass(frozen=True)
class NormalizationParams:
    """Per-column min/max of features and target. Constant columns are flagged."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float
    constant_columns: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if np.any(self.feature_max < self.feature_min):
            raise ValueError("max must be >= min per column")

    @property
    def feature_range(self) -> np.ndarray:
        return self.feature_max - self.feature_min

    def scale_features(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        rng = self.feature_range
        safe = np.where(rng > 0, rng, 1.0)
        out = (X - self.feature_min) / safe
        out[..., rng == 0] = 0.0
        return out

    def inverse_features(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.feature_range + self.feature_min

    def scale_target(self, y):
        span = self.target_max - self.target_min
        if span == 0:
            return np.zeros_like(np.asarray(y, dtype=float))
        return (np.asarray(y, dtype=float) - self.target_min) / span

    def inverse_target(self, z):
        return np.asarray(z, dtype=float) * (self.target_max - self.target_min) + self.target_min

    def subset(self, columns: Sequence[int]) -> "NormalizationParams":
        cols = list(columns)
        flagged = tuple(i for i, c in enumerate(cols) if c in self.constant_columns)
        return NormalizationParams(self.feature_min[cols].copy(), self.feature_max[cols].copy(),
                                   self.target_min, self.target_max, flagged)

    def to_dict(self) -> dict:
        return {
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "target_min": self.target_min,
            "target_max": self.target_max,
            "constant_columns": list(self.constant_columns),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(np.asarray(d["feature_min"], dtype=float),
                   np.asarray(d["feature_max"], dtype=float),
                   float(d["target_min"]), float(d["target_max"]),
                   tuple(d.get("constant_columns", ())))


def fit_normalization(X: np.ndarray, y: np.ndarray | None = None) -> NormalizationParams:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInput("cannot fit normalization on an empty matrix")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("feature matrix contains non-finite entries")
    lo, hi = X.min(axis=0), X.max(axis=0)
    flagged = tuple(int(i) for i in np.flatnonzero(hi == lo))
    if y is None or len(y) == 0:
        tmin = tmax = 0.0
    else:
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise NonFiniteInput("target contains non-finite entries")
        tmin, tmax = float(y.min()), float(y.max())
    return NormalizationParams(lo, hi, tmin, tmax, flagged)


# --------------------------------------------------------------------------
# CSV ingestion


def _parse_float(value: str, lineno: int, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise RangeViolation(f"row {lineno}: field {name}={value!r} is not a number",
                             row=lineno, field=name) from None


def parse_site_csv(text: str, *, require_target: bool = True) -> list[SiteRecord]:
    """Parse site-month CSV text into validated SiteRecords (first-seen order)."""
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames
    if not header:
        raise MissingHeader("CSV is empty; expected header " + ",".join(CSV_HEADER))
    header = [h.strip() for h in header]
    required = [h for h in CSV_HEADER if require_target or h != TARGET_NAME]
    missing = [h for h in required if h not in header]
    if missing:
        raise MissingHeader(f"CSV header lacks columns: {', '.join(missing)}")
    reader.fieldnames = header

    groups: dict[tuple[str, str], list] = {}
    for lineno, row in enumerate(reader, start=2):
        key = (row["site"].strip(), row["state"].strip())
        try:
            role = Role.parse(row["role"] or "")
        except UnknownRole as exc:
            raise UnknownRole(f"row {lineno}: {exc}") from None
        vals = {n: _parse_float(row[n], lineno, n)
                for n in ("latitude", "longitude", "elevation", "solar_radiation",
                          "air_temperature", "relative_humidity", "atmospheric_pressure",
                          "earth_temperature")}
        ws_text = (row.get(TARGET_NAME) or "").strip()
        if ws_text == "" and not require_target:
            ws = math.nan
        else:
            ws = _parse_float(ws_text, lineno, TARGET_NAME)
            if math.isnan(ws):
                raise RangeViolation(f"row {lineno}: wind_speed is NaN", row=lineno,
                                     field=TARGET_NAME)
        month_val = _parse_float(row["month"], lineno, "month")
        if month_val != int(month_val):
            raise RangeViolation(f"row {lineno}: month={row['month']!r} is not an integer",
                                 row=lineno, field="month")
        try:
            obs = MonthlyObservation(
                int(month_val), vals["solar_radiation"], vals["air_temperature"],
                vals["relative_humidity"], vals["atmospheric_pressure"],
                vals["earth_temperature"], ws)
        except RangeViolation as exc:
            raise RangeViolation(f"row {lineno}: {exc}", row=lineno, field=exc.field) from None
        site_vals = (vals["latitude"], vals["longitude"], vals["elevation"], role)
        entry = groups.setdefault(key, [site_vals, [], lineno])
        if entry[0] != site_vals:
            raise RangeViolation(
                f"row {lineno}: site {key[0]!r} has inconsistent coordinates/elevation/role",
                row=lineno)
        entry[1].append(obs)

    sites = []
    for (name, state), (site_vals, months, first_line) in groups.items():
        lat, lon, elev, role = site_vals
        if len(months) != 12:
            raise IncompleteSite(f"site {name!r} (first row {first_line}) has "
                                 f"{len(months)} month rows; need 12")
        try:
            sites.append(SiteRecord(name, state, lat, lon, elev, role, tuple(months)))
        except RangeViolation as exc:
            raise RangeViolation(f"row {first_line}: {exc}", row=first_line,
                                 field=exc.field) from None
    return sites


def load_site_table(path, *, require_target: bool = True) -> list[SiteRecord]:
    """Load and validate a site-month CSV file."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_site_csv(text, require_target=require_target)


def write_site_table(sites: Iterable[SiteRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for s in sites:
            for m in s.months:
                ws = "" if math.isnan(m.wind_speed) else repr(m.wind_speed)
                writer.writerow([s.name, s.state, s.role.value, repr(s.latitude),
                                 repr(s.longitude), repr(s.elevation), m.month,
                                 repr(m.solar_radiation), repr(m.air_temperature),
                                 repr(m.relative_humidity), repr(m.atmospheric_pressure),
                                 repr(m.earth_temperature), ws])


# --------------------------------------------------------------------------
# matrices


def build_feature_matrix(sites: Sequence[SiteRecord]) -> FeatureMatrix:
    if not sites:
        raise EmptyInput("no sites to build a feature matrix from")
    rows, target, origin = [], [], []
    for si, s in enumerate(sites):
        for m in s.months:
            rows.append((m.solar_radiation, m.air_temperature, m.relative_humidity,
                         s.latitude, s.longitude, m.atmospheric_pressure,
                         m.earth_temperature, s.elevation))
            target.append(m.wind_speed)
            origin.append((si, m.month))
    return FeatureMatrix(np.array(rows, dtype=float), np.array(target, dtype=float),
                         tuple(origin))


def minmax_scale(matrix: FeatureMatrix) -> tuple[FeatureMatrix, NormalizationParams]:
    """Map every non-constant column (and the target) affinely onto [0, 1].

    Constant columns become all zeros and are listed in
    ``NormalizationParams.constant_columns``.
    """
    if not (np.all(np.isfinite(matrix.X)) and np.all(np.isfinite(matrix.y))):
        raise NonFiniteInput("matrix or target contains non-finite entries")
    params = fit_normalization(matrix.X, matrix.y)
    scaled = FeatureMatrix(params.scale_features(matrix.X), params.scale_target(matrix.y),
                           matrix.row_origin, matrix.feature_names)
    return scaled, params


def inverse_scale(matrix: FeatureMatrix, params: NormalizationParams) -> FeatureMatrix:
    return FeatureMatrix(params.inverse_features(matrix.X), params.inverse_target(matrix.y),
                         matrix.row_origin, matrix.feature_names)


def split_by_role(sites: Sequence[SiteRecord]) -> tuple[list[SiteRecord], list[SiteRecord]]:
    train, test = [], []
    for s in sites:
        role = s.role if isinstance(s.role, Role) else Role.parse(str(s.role))
        (train if role is Role.TRAINING else test).append(s)
    if not test:
        warnings.warn("no Testing-role sites; test partition is empty", stacklevel=2)
    if not train:
        warnings.warn("no Training-role sites; training partition is empty", stacklevel=2)
    return train, test


# --------------------------------------------------------------------------
# site rosters (fetch input)


@dataclass(frozen=True)
class RosterEntry:
    name: str
    state: str
    role: Role
    latitude: float | None
    longitude: float | None


def bundled_roster_path() -> Path:
    """The 66-site India roster (names, states, Training/Testing roles).

    Coordinates are left blank; fill them in before running ``fetch``.
    """
    return Path(__file__).with_name("data") / "india_sites_roster.csv"


def load_roster(path=None) -> list[RosterEntry]:
    path = Path(path) if path is not None else bundled_roster_path()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = ("site", "state", "role", "latitude", "longitude")
        if not reader.fieldnames or any(h not in reader.fieldnames for h in need):
            raise MissingHeader(f"{path}: roster header must be {','.join(need)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            coords = []
            for key in ("latitude", "longitude"):
                text = (row[key] or "").strip()
                coords.append(_parse_float(text, lineno, key) if text else None)
            try:
                role = Role.parse(row["role"] or "")
            except UnknownRole as exc:
                raise UnknownRole(f"{path} row {lineno}: {exc}") from None
            out.append(RosterEntry(row["site"].strip(), row["state"].strip(), role, *coords))
    return out
