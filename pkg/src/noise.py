"""
GPS noise analyses: spread of a static recording and the velocity error of
down-sampled straight-line runs as a function of the window size.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import InsufficientDataError, InvalidInputError
from .geo import EARTH_RADIUS_M, LatLon, LocationSample, haversine, haversine_array

logger = logging.getLogger(__name__)

METERS_PER_DEGREE = EARTH_RADIUS_M * math.pi / 180.0


@dataclass(frozen=True)
class NoiseStats:
    mean_pos: LatLon
    max_dev_lat: float
    max_dev_lon: float
    max_dev_lat_m: float
    max_dev_lon_m: float
    samples: int


def static_noise_stats(fixes: Sequence[LocationSample]) -> NoiseStats:
    """Mean position of a stationary recording and the largest per-axis deviation from it."""
    if len(fixes) < 2:
        raise InsufficientDataError(f"static noise needs at least 2 fixes, got {len(fixes)}")
    lat = np.array([f.lat for f in fixes])
    lon = np.array([f.lon for f in fixes])
    mean_lat, mean_lon = float(lat.mean()), float(lon.mean())
    dev_lat = float(np.max(np.abs(lat - mean_lat)))
    dev_lon = float(np.max(np.abs(lon - mean_lon)))
    return NoiseStats(
        mean_pos=(mean_lat, mean_lon),
        max_dev_lat=dev_lat,
        max_dev_lon=dev_lon,
        max_dev_lat_m=dev_lat * METERS_PER_DEGREE,
        max_dev_lon_m=dev_lon * METERS_PER_DEGREE * math.cos(math.radians(mean_lat)),
        samples=len(fixes),
    )


@dataclass(frozen=True)
class SweepRow:
    w: int
    mean_dev: float
    p95_dev: float
    max_dev: float
    runs_used: int

    def to_dict(self) -> dict:
        return {'w': self.w, 'mean_dev': self.mean_dev, 'p95_dev': self.p95_dev,
                'max_dev': self.max_dev, 'runs_used': self.runs_used}


def blocked_velocities(lat: np.ndarray, lon: np.ndarray, t_s: np.ndarray, w: int, phase: int) -> np.ndarray:
    """Speeds between consecutive means of w-sample blocks starting at `phase`."""
    blocks = (len(lat) - phase) // w
    if blocks < 2:
        return np.empty(0)
    end = phase + blocks * w
    means = [a[phase:end].reshape(blocks, w).mean(axis=1) for a in (lat, lon, t_s)]
    b_lat, b_lon, b_t = means
    distances = haversine_array(b_lat[:-1], b_lon[:-1], b_lat[1:], b_lon[1:])
    return distances / np.diff(b_t)


def dynamic_noise_sweep(runs: Sequence[Tuple[Sequence[LocationSample], float]],
                        w_range: Iterable[int] = range(1, 11)) -> List[SweepRow]:
    """
    Velocity error of window-averaged positions against each run's nominal speed.

    For every w all phase offsets 0..w-1 are used. Each (run, phase) pair
    contributes its mean absolute deviation; `mean_dev` averages those terms,
    while the percentile and maximum pool every individual deviation.
    """
    prepared = []
    for seq, nominal in runs:
        if nominal < 0:
            raise InvalidInputError(f"nominal velocity {nominal} is negative")
        t = np.array([s.t for s in seq], dtype=float) / 1000.0
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise InvalidInputError("noise run timestamps must be strictly increasing")
        prepared.append((np.array([s.lat for s in seq]), np.array([s.lon for s in seq]), t, nominal))

    rows = []
    for w in w_range:
        if w < 1:
            raise InvalidInputError(f"window size {w} must be at least 1")
        terms: List[float] = []
        pooled: List[np.ndarray] = []
        used = 0
        for index, (lat, lon, t, nominal) in enumerate(prepared):
            if len(lat) < 2 * w:
                logger.warning(f"Skipping run {index} at w={w}: {len(lat)} samples is fewer than two windows")
                continue
            used += 1
            for phase in range(w):
                dev = np.abs(blocked_velocities(lat, lon, t, w, phase) - nominal)
                if dev.size:
                    terms.append(float(dev.mean()))
                    pooled.append(dev)
        if not terms:
            logger.warning(f"No usable runs at w={w}")
            continue
        everything = np.concatenate(pooled)
        rows.append(SweepRow(w=w, mean_dev=float(np.mean(terms)),
                             p95_dev=float(np.percentile(everything, 95)),
                             max_dev=float(everything.max()), runs_used=used))
        logger.debug(f"w={w}: mean deviation {rows[-1].mean_dev:.3f} m/s over {used} runs")
    return rows


def runs_from_pings(fixes: Sequence[LocationSample], pings: Sequence[Tuple[int, str]]
                    ) -> List[Tuple[List[LocationSample], float]]:
    """
    Cut a ping-annotated walk into straight runs.

    Each 'start' ping pairs with the next 'stop' ping; the nominal speed is the
    distance between the first and last fix of the run over the ping interval.
    """
    runs = []
    start = None
    for t, label in pings:
        label = label.strip().lower()
        if label == 'start':
            start = t
        elif label == 'stop' and start is not None:
            seq = [f for f in fixes if start <= f.t <= t]
            if len(seq) >= 2 and t > start:
                nominal = haversine(seq[0].position, seq[-1].position) / ((t - start) / 1000.0)
                runs.append((seq, nominal))
            else:
                logger.warning(f"Ignoring ping pair {start}-{t}: too few fixes")
            start = None
    return runs
