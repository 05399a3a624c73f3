"""NASA POWER point-climatology client.

Requests the long-term monthly means for one coordinate and converts them to
``MonthlyObservation`` units. Responses are cached on disk as JSON documents
holding the request metadata and the raw response body; the same format is
used for the committed test fixtures, so a cache directory doubles as a
fixture directory.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .dataset import MonthlyObservation, Role, SiteRecord
from .errors import InvalidCoordinate, RangeViolation, UpstreamFormat, UpstreamUnavailable

log = logging.getLogger(__name__)

POWER_URL = "https://power.larc.nasa.gov/api/temporal/climatology/point"
CACHE_ENV = "WINDRELIEF_CACHE_DIR"
MONTH_KEYS = ("JAN", "FEB", "MAR", "APR", "MAY", "JUN",
              "JUL", "AUG", "SEP", "OCT", "NOV", "DEC")
WIND_PARAMS = {10: "WS10M", 50: "WS50M"}

# POWER parameter -> (MonthlyObservation field, unit conversion)
_BASE_PARAMS = {
    # climatology irradiance is a daily insolation, kWh/m^2/day
    "ALLSKY_SFC_SW_DWN": ("solar_radiation", lambda v: v * 1000.0 / 24.0),
    "T2M": ("air_temperature", float),
    "RH2M": ("relative_humidity", float),
    "PS": ("atmospheric_pressure", float),  # already kPa
    "TS": ("earth_temperature", float),
}

# (url, params, timeout) -> (status_code, body bytes)
Transport = Callable[[str, dict, float], tuple[int, bytes]]


def _requests_transport(url: str, params: dict, timeout: float) -> tuple[int, bytes]:
    import requests

    resp = requests.get(url, params=params, timeout=timeout)
    return resp.status_code, resp.content


@dataclass(frozen=True)
class Climatology:
    latitude: float
    longitude: float
    elevation: float  # meters, as reported by the service
    months: tuple[MonthlyObservation, ...]


def request_params(latitude: float, longitude: float, wind_height: int = 10) -> dict:
    if wind_height not in WIND_PARAMS:
        raise ValueError(f"wind_height must be one of {sorted(WIND_PARAMS)}")
    names = list(_BASE_PARAMS) + [WIND_PARAMS[wind_height]]
    return {
        "parameters": ",".join(names),
        "community": "RE",
        "latitude": f"{latitude:.4f}",
        "longitude": f"{longitude:.4f}",
        "format": "JSON",
    }


def check_coordinates(latitude: float, longitude: float) -> None:
    if not -90.0 <= latitude <= 90.0:
        raise InvalidCoordinate(f"latitude {latitude} outside [-90, 90]")
    if not -180.0 <= longitude <= 180.0:
        raise InvalidCoordinate(f"longitude {longitude} outside [-180, 180]")


def parse_response(body: bytes, wind_height: int = 10) -> Climatology:
    """Convert a raw POWER climatology JSON body into a Climatology."""
    try:
        doc = json.loads(body)
        coords = doc["geometry"]["coordinates"]
        table = doc["properties"]["parameter"]
    except (ValueError, KeyError, TypeError) as exc:
        raise UpstreamFormat(f"unparseable POWER response: {exc}") from None
    fill = doc.get("header", {}).get("fill_value", -999.0)
    wanted = dict(_BASE_PARAMS)
    wanted[WIND_PARAMS[wind_height]] = ("wind_speed", float)

    columns: dict[str, list[float]] = {}
    for pname, (fname, conv) in wanted.items():
        series = table.get(pname)
        if not isinstance(series, dict):
            raise UpstreamFormat(f"POWER response lacks parameter {pname}")
        values = []
        for key in MONTH_KEYS:
            raw = series.get(key)
            if not isinstance(raw, (int, float)) or raw == fill:
                raise UpstreamFormat(f"POWER parameter {pname} has no valid value for {key}")
            values.append(conv(float(raw)))
        columns[fname] = values
    try:
        months = tuple(
            MonthlyObservation(month=i + 1, **{f: columns[f][i] for f in columns})
            for i in range(12))
        lon, lat = float(coords[0]), float(coords[1])
        elev = float(coords[2]) if len(coords) > 2 else 0.0
    except (RangeViolation, TypeError, ValueError, IndexError) as exc:
        raise UpstreamFormat(f"POWER response values rejected: {exc}") from None
    return Climatology(lat, lon, elev, months)


class PowerClient:
    """Fetches POWER climatologies with retry and an optional disk cache."""

    def __init__(self, cache_dir=None, transport: Transport | None = None,
                 retries: int = 3, backoff: float = 1.0, timeout: float = 60.0,
                 wind_height: int = 10):
        if cache_dir is None and os.environ.get(CACHE_ENV):
            cache_dir = os.environ[CACHE_ENV]
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.transport = transport or _requests_transport
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.wind_height = wind_height

    def cache_path(self, params: dict) -> Path | None:
        if self.cache_dir is None:
            return None
        key = json.dumps(params, sort_keys=True).encode()
        digest = hashlib.sha256(key).hexdigest()[:16]
        return self.cache_dir / f"power_{params['latitude']}_{params['longitude']}_{digest}.json"

    def _download(self, params: dict) -> bytes:
        last = None
        for attempt in range(self.retries + 1):
            try:
                status, body = self.transport(POWER_URL, params, self.timeout)
            except Exception as exc:  # network stack errors vary by transport
                last = f"{type(exc).__name__}: {exc}"
            else:
                if status == 200:
                    return body
                last = f"HTTP {status}"
                if 400 <= status < 500 and status != 429:
                    break
            if attempt < self.retries:
                time.sleep(self.backoff * 2 ** attempt)
        raise UpstreamUnavailable(
            f"POWER request for ({params['latitude']}, {params['longitude']}) failed "
            f"after {self.retries + 1} attempts: {last}")

    def fetch(self, latitude: float, longitude: float) -> Climatology:
        check_coordinates(latitude, longitude)
        params = request_params(latitude, longitude, self.wind_height)
        path = self.cache_path(params)
        if path is not None and path.exists():
            return parse_response(load_fixture(path)["body"], self.wind_height)
        body = self._download(params)
        clim = parse_response(body, self.wind_height)
        if path is not None:
            save_fixture(path, params, body)
        return clim


def save_fixture(path, params: dict, body: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"request": {"url": POWER_URL, "params": params}, "body": body.decode("utf-8")}
    path.write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")


def load_fixture(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    doc["body"] = doc["body"].encode("utf-8")
    return doc


def fetch_nasa_power(latitude: float, longitude: float, *, wind_height: int = 10,
                     client: PowerClient | None = None) -> list[MonthlyObservation]:
    """Twelve monthly climatology rows for one coordinate."""
    client = client or PowerClient(wind_height=wind_height)
    return list(client.fetch(latitude, longitude).months)


def fetch_site(name: str, state: str, role, latitude: float, longitude: float,
               client: PowerClient) -> SiteRecord:
    clim = client.fetch(latitude, longitude)
    return SiteRecord(name, state, latitude, longitude, clim.elevation,
                      role if isinstance(role, Role) else Role.parse(role), clim.months)
