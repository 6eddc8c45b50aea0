import math
from typing import List, Optional, Sequence, Tuple

import pytest

from src.geo import EARTH_RADIUS_M, Journey, LocationSample
from src.motion_fsm import GRAVITY, AccelSample

M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0
ORIGIN = (35.9, 14.5)
T0 = 1_700_000_000_000


def build_fixes(pieces: Sequence[Tuple[int, float]], start_t: int = T0, period_ms: int = 2000,
                origin: Tuple[float, float] = ORIGIN, sats: Optional[int] = None) -> List[LocationSample]:
    """
    Noise-free fixes heading due north.

    `pieces` is a list of (fix count, speed in m/s). Each fix is emitted at the
    current position, which then advances by speed * period.
    """
    lat, lon = origin
    t = start_t
    fixes = []
    for count, v in pieces:
        for _ in range(count):
            fixes.append(LocationSample(t=t, lat=lat, lon=lon, sats=sats))
            t += period_ms
            lat += v * period_ms / 1000.0 / M_PER_DEG
    return fixes


def north_journey(start_t: int, n: int, step_m: float, period_ms: int = 1000, lat0: float = ORIGIN[0],
                  lon: float = ORIGIN[1]) -> Journey:
    """A straight journey of n points, step_m meters apart."""
    points = [LocationSample(t=start_t + k * period_ms, lat=lat0 + k * step_m / M_PER_DEG, lon=lon)
              for k in range(n)]
    return Journey.from_points(points)


def accel_stream(devs: Sequence[float], start_t: int = T0, period_ms: int = 200) -> List[AccelSample]:
    """Accelerometer samples whose filtered magnitude deviation equals `devs`."""
    return [AccelSample(t=start_t + k * period_ms, ax=0.0, ay=0.0, az=GRAVITY + d) for k, d in enumerate(devs)]


@pytest.fixture
def journey_fixes():
    """10 stationary windows, 40 windows moving at 2 m/s, 40 stationary windows (W = 3, 2 s fixes)."""
    return build_fixes([(30, 0.0), (120, 2.0), (120, 0.0)])
