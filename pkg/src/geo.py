"""
Geometric and kinematic primitives over location sequences.

Bounds are plain lat/lon min/max boxes, so journeys crossing the antimeridian
or a pole are not supported.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, OrderingError, ValidationError

EARTH_RADIUS_M = 6_371_000.0

LatLon = Tuple[float, float]


@dataclass(frozen=True)
class LocationSample:
    """One GPS fix. `t` is milliseconds since epoch, `sats` is None when unknown."""

    t: int
    lat: float
    lon: float
    sats: Optional[int] = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError('lat', f"{self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError('lon', f"{self.lon} outside [-180, 180]")
        if self.sats is not None and self.sats < 0:
            raise ValidationError('sats', f"{self.sats} is negative")

    @property
    def position(self) -> LatLon:
        return (self.lat, self.lon)


@dataclass(frozen=True)
class GeoBounds:
    bl: LatLon
    tr: LatLon

    def contains(self, point: LatLon) -> bool:
        return (self.bl[0] <= point[0] <= self.tr[0]
                and self.bl[1] <= point[1] <= self.tr[1])

    def corners(self) -> Tuple[LatLon, LatLon, LatLon, LatLon]:
        return (self.bl, (self.bl[0], self.tr[1]), self.tr, (self.tr[0], self.bl[1]))


def haversine(a: LatLon, b: LatLon) -> float:
    """Great-circle distance in meters between two (lat, lon) points in degrees."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    # Clamp rounding overshoot for antipodal points
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


def haversine_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorized haversine over numpy arrays of degrees."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(x, dtype=float)) for x in (lat1, lon1, lat2, lon2))
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(1.0, h)))


def path_distance(seq: Sequence[LocationSample]) -> float:
    """Sum of haversine distances between consecutive samples."""
    if not seq:
        raise InvalidInputError("path_distance requires at least one sample")
    lat = np.array([s.lat for s in seq])
    lon = np.array([s.lon for s in seq])
    return float(haversine_array(lat[:-1], lon[:-1], lat[1:], lon[1:]).sum())


def speed(a: LocationSample, b: LocationSample) -> float:
    """Instantaneous speed in m/s between two samples."""
    if a.t == b.t:
        raise InvalidInputError(f"speed undefined for equal timestamps ({a.t})")
    return haversine(a.position, b.position) / (abs(b.t - a.t) / 1000.0)


def bounds_of(points: Sequence[LocationSample]) -> GeoBounds:
    if not points:
        raise InvalidInputError("bounds_of requires at least one point")
    lats = [p.lat for p in points]
    lons = [p.lon for p in points]
    return GeoBounds(bl=(min(lats), min(lons)), tr=(max(lats), max(lons)))


def bounds_diagonal(b: GeoBounds) -> float:
    """Journey extent: haversine between the bottom-left and top-right corners."""
    return haversine(b.bl, b.tr)


def check_strictly_increasing(times: Sequence[int], what: str = 'samples') -> None:
    for i in range(1, len(times)):
        if times[i] <= times[i - 1]:
            raise OrderingError(
                f"{what} not strictly increasing at index {i}: {times[i - 1]} -> {times[i]}"
            )


@dataclass(frozen=True)
class Journey:
    """An ordered run of raw fixes with derived time span, bounds and length."""

    points: Tuple[LocationSample, ...]
    start_t: int
    end_t: int
    bounds: GeoBounds
    path_length: float = field(compare=False)

    @classmethod
    def from_points(cls, points: Sequence[LocationSample]) -> 'Journey':
        points = tuple(points)
        if not points:
            raise InvalidInputError("a journey needs at least one point")
        check_strictly_increasing([p.t for p in points], 'journey points')
        return cls(
            points=points,
            start_t=points[0].t,
            end_t=points[-1].t,
            bounds=bounds_of(points),
            path_length=path_distance(points),
        )

    @property
    def extent(self) -> float:
        return bounds_diagonal(self.bounds)

    @property
    def duration_s(self) -> float:
        return (self.end_t - self.start_t) / 1000.0

    def __len__(self) -> int:
        return len(self.points)
