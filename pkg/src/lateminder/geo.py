"""Geodesic and kinematic primitives on a spherical Earth."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_MILE = 1609.344
MPS_TO_MPH = 3600.0 / METERS_PER_MILE


class HasLatLon(Protocol):
    @property
    def lat(self) -> float: ...

    @property
    def lon(self) -> float: ...


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 < self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class Fix:
    """One GPS sample. ``speed`` is in mph and ``None`` when the source had none."""

    point: GeoPoint
    timestamp: int
    speed: Optional[float] = None

    def __post_init__(self):
        if self.timestamp <= 0:
            raise ValueError(f"timestamp must be positive, got {self.timestamp}")
        if self.speed is not None and not (self.speed >= 0 and math.isfinite(self.speed)):
            raise ValueError(f"speed must be a non-negative number, got {self.speed}")

    @property
    def lat(self) -> float:
        return self.point.lat

    @property
    def lon(self) -> float:
        return self.point.lon


def haversine_distance(a: HasLatLon, b: HasLatLon) -> float:
    """Great-circle distance in meters."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


def haversine_many(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Vectorised distances from one point to arrays of points, in meters."""
    phi1 = np.radians(lat)
    phi2 = np.radians(lats)
    dphi = phi2 - phi1
    dlmb = np.radians(lons - lon)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(1.0, h)))


def derived_speed(a: Fix, b: Fix) -> float:
    """Average speed in mph between two fixes."""
    dt = b.timestamp - a.timestamp
    if dt <= 0:
        raise ValueError("non-increasing time")
    return haversine_distance(a, b) / dt * MPS_TO_MPH


def wrap_lon(lon: float) -> float:
    """Map any longitude into (-180, 180]."""
    wrapped = math.fmod(lon + 180.0, 360.0)
    if wrapped <= 0:
        wrapped += 360.0
    return wrapped - 180.0


def to_local(lat0: float, lon0: float, lats: np.ndarray, lons: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Equirectangular projection about (lat0, lon0); returns east/north meters."""
    dlon = (np.asarray(lons) - lon0 + 180.0) % 360.0 - 180.0
    x = np.radians(dlon) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    y = np.radians(np.asarray(lats) - lat0) * EARTH_RADIUS_M
    return x, y


def from_local(lat0: float, lon0: float, x: float, y: float) -> GeoPoint:
    lat = lat0 + math.degrees(y / EARTH_RADIUS_M)
    coslat = math.cos(math.radians(lat0))
    lon = lon0 + (math.degrees(x / (EARTH_RADIUS_M * coslat)) if coslat > 1e-12 else 0.0)
    return GeoPoint(max(-90.0, min(90.0, lat)), wrap_lon(lon))


def offset(origin: HasLatLon, east_m: float, north_m: float) -> GeoPoint:
    """Point displaced from ``origin`` by a small east/north offset in meters."""
    return from_local(origin.lat, origin.lon, east_m, north_m)
