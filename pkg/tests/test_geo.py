import math

import numpy as np
import pytest

from src.errors import InvalidInputError, OrderingError, ValidationError
from src.geo import (EARTH_RADIUS_M, GeoBounds, Journey, LocationSample, bounds_diagonal, bounds_of,
                     check_strictly_increasing, haversine, haversine_array, path_distance, speed)

from .conftest import M_PER_DEG, T0


def test_haversine_identity_and_degree():
    """Zero for identical points, 1/360 of the circumference for one degree on the equator."""
    assert haversine((35.0, 14.0), (35.0, 14.0)) == 0.0
    expected = 2 * math.pi * EARTH_RADIUS_M / 360.0
    assert haversine((0.0, 0.0), (0.0, 1.0)) == pytest.approx(expected, rel=1e-6)


def test_haversine_symmetry_and_vectorized_agreement():
    rng = np.random.default_rng(7)
    lat = rng.uniform(-89, 89, size=(1000, 2))
    lon = rng.uniform(-179, 179, size=(1000, 2))
    forward = [haversine((lat[i, 0], lon[i, 0]), (lat[i, 1], lon[i, 1])) for i in range(1000)]
    backward = [haversine((lat[i, 1], lon[i, 1]), (lat[i, 0], lon[i, 0])) for i in range(1000)]
    assert forward == pytest.approx(backward, rel=1e-12)
    vectorized = haversine_array(lat[:, 0], lon[:, 0], lat[:, 1], lon[:, 1])
    assert vectorized == pytest.approx(forward, rel=1e-9)


def test_location_sample_validation():
    with pytest.raises(ValidationError) as excinfo:
        LocationSample(t=0, lat=95.0, lon=0.0)
    assert excinfo.value.field == 'lat'
    with pytest.raises(ValidationError) as excinfo:
        LocationSample(t=0, lat=0.0, lon=-181.0)
    assert excinfo.value.field == 'lon'


def test_path_distance():
    a = LocationSample(T0, 35.9, 14.5)
    b = LocationSample(T0 + 1000, 35.901, 14.5)
    assert path_distance([a]) == 0.0
    assert path_distance([a, b]) == pytest.approx(haversine(a.position, b.position), rel=1e-12)

    points = [LocationSample(T0 + k * 1000, 35.9 + 0.001 * (k % 2), 14.5 + 0.001 * k) for k in range(5)]
    brute = sum(haversine(points[i].position, points[i + 1].position) for i in range(4))
    assert path_distance(points) == pytest.approx(brute)

    with pytest.raises(InvalidInputError):
        path_distance([])


def test_path_distance_of_a_long_trace():
    rng = np.random.default_rng(9)
    lat = 35.9 + np.cumsum(rng.normal(0, 1e-4, 20_000))
    lon = 14.5 + np.cumsum(rng.normal(0, 1e-4, 20_000))
    points = [LocationSample(T0 + k * 1000, float(a), float(b)) for k, (a, b) in enumerate(zip(lat, lon))]
    brute = math.fsum(haversine(p.position, q.position) for p, q in zip(points, points[1:]))
    assert isinstance(path_distance(points), float)
    assert path_distance(points) == pytest.approx(brute, rel=1e-9)


def test_speed():
    a = LocationSample(T0, 35.9, 14.5)
    assert speed(a, LocationSample(T0 + 2000, 35.9, 14.5)) == 0.0

    b = LocationSample(T0 + 10_000, 35.9 + 100.0 / M_PER_DEG, 14.5)
    assert speed(a, b) == pytest.approx(10.0, rel=1e-9)
    slower = LocationSample(T0 + 20_000, b.lat, b.lon)
    assert speed(a, slower) == pytest.approx(speed(a, b) / 2)

    with pytest.raises(InvalidInputError):
        speed(a, LocationSample(T0, 36.0, 14.5))


def test_bounds():
    p = LocationSample(T0, 1.0, 2.0)
    assert bounds_of([p]) == GeoBounds(bl=(1.0, 2.0), tr=(1.0, 2.0))
    assert bounds_diagonal(bounds_of([p])) == 0.0

    b = bounds_of([LocationSample(T0, 0.0, 0.0), LocationSample(T0 + 1, 1.0, 1.0)])
    assert b.bl == (0.0, 0.0) and b.tr == (1.0, 1.0)

    rng = np.random.default_rng(3)
    points = [LocationSample(T0 + k, float(la), float(lo))
              for k, (la, lo) in enumerate(zip(rng.uniform(-80, 80, 100), rng.uniform(-170, 170, 100)))]
    box = bounds_of(points)
    assert all(box.contains(q.position) for q in points)

    with pytest.raises(InvalidInputError):
        bounds_of([])


def test_bounds_diagonal_of_straight_and_l_shaped_paths():
    start = LocationSample(T0, 35.9, 14.5)
    end = LocationSample(T0 + 1000, 35.91, 14.5)
    assert bounds_diagonal(bounds_of([start, end])) == pytest.approx(haversine(start.position, end.position))

    corner = LocationSample(T0 + 2000, 35.91, 14.52)
    b = bounds_of([start, end, corner])
    assert bounds_diagonal(b) == pytest.approx(haversine((35.9, 14.5), (35.91, 14.52)))


def test_journey_from_points():
    points = [LocationSample(T0 + k * 1000, 35.9 + k * 1e-4, 14.5) for k in range(5)]
    j = Journey.from_points(points)
    assert j.start_t == T0 and j.end_t == T0 + 4000
    assert j.path_length == pytest.approx(path_distance(points))
    assert len(j) == 5
    assert j.duration_s == 4.0

    with pytest.raises(OrderingError):
        Journey.from_points([points[1], points[0]])


def test_check_strictly_increasing():
    check_strictly_increasing([1, 2, 3])
    with pytest.raises(OrderingError):
        check_strictly_increasing([1, 1, 2])
