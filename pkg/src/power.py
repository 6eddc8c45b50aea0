"""
Battery model: per-state discharge rates, simulated discharge curves and
least-squares fitting of sampled battery levels.

Rates are battery-percentage points per hour.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .controller import GlobalState, StateInterval, StateTimeline
from .errors import InsufficientDataError, InvalidInputError, OrderingError, SpanMismatchError

logger = logging.getLogger(__name__)

MS_PER_HOUR = 3_600_000


class GpsMode(str, Enum):
    OUTDOOR = 'outdoor'
    ASSISTED = 'assisted'
    INDOOR = 'indoor'
    INDOOR_ASSISTED = 'indoor-assisted'


# Measured GPS drain per location mode on one handset; used as ratios only
GPS_MODE_RATES = {
    GpsMode.OUTDOOR: 20.23,
    GpsMode.ASSISTED: 22.75,
    GpsMode.INDOOR: 26.37,
    GpsMode.INDOOR_ASSISTED: 28.87,
}


@dataclass(frozen=True)
class PowerProfile:
    name: str
    idle_rate: float
    accel_rate: float
    gps_rate: float
    wake_lock_rate: Optional[float] = None
    accel_sleep_rate: Optional[float] = None
    gps_multiplier: float = 1.0

    def __post_init__(self):
        if not 0 < self.idle_rate <= self.accel_rate <= self.gps_rate:
            raise InvalidInputError(
                f"profile {self.name}: rates must satisfy 0 < idle <= accel <= gps, "
                f"got {self.idle_rate}, {self.accel_rate}, {self.gps_rate}"
            )
        if self.gps_multiplier < 1.0:
            raise InvalidInputError(f"profile {self.name}: gps_multiplier must be at least 1")

    def rate(self, state: GlobalState) -> float:
        if state == GlobalState.GPS:
            return self.gps_rate * self.gps_multiplier
        if state == GlobalState.ACC:
            return self.accel_rate
        return self.idle_rate

    def with_gps_mode(self, mode: Union[GpsMode, str]) -> 'PowerProfile':
        mode = GpsMode(mode)
        return replace(self, gps_multiplier=GPS_MODE_RATES[mode] / GPS_MODE_RATES[GpsMode.OUTDOOR])


DEVICE_PRESETS: Dict[str, PowerProfile] = {
    'T1': PowerProfile('T1', 1.79, 6.71, 20.13, wake_lock_rate=6.16, accel_sleep_rate=6.58),
    'T2': PowerProfile('T2', 1.06, 3.22, 10.22, accel_sleep_rate=3.20),
    'S1': PowerProfile('S1', 5.02, 6.70, 47.97),
    'S2': PowerProfile('S2', 2.17, 7.42, 28.26, wake_lock_rate=6.54, accel_sleep_rate=7.22),
}


def get_profile(name: str) -> PowerProfile:
    try:
        return DEVICE_PRESETS[name.upper()]
    except KeyError:
        raise InvalidInputError(f"Unknown device preset '{name}' (known: {', '.join(sorted(DEVICE_PRESETS))})")


@dataclass(frozen=True)
class BatteryCurve:
    points: Tuple[Tuple[int, float], ...]
    start_level: float
    linear_rate: Optional[float] = None
    quad_coeff: Optional[float] = None

    @property
    def final_level(self) -> float:
        return self.points[-1][1] if self.points else self.start_level

    def level_at(self, t: int) -> float:
        if not self.points:
            return self.start_level
        times = [p[0] for p in self.points]
        return float(np.interp(t, times, [p[1] for p in self.points]))


def consumption(timeline: StateTimeline, profile: PowerProfile) -> float:
    """Battery points drained over the whole timeline."""
    return sum(profile.rate(i.state) * (i.t_end - i.t_start) / MS_PER_HOUR for i in timeline.intervals)


def simulate_battery(timeline: StateTimeline, profile: PowerProfile, start_level: float = 100.0,
                     step_s: float = 60.0) -> BatteryCurve:
    """
    Piecewise-linear discharge over `timeline`, sampled every `step_s` seconds
    inside each interval and at every interval boundary. Levels are clamped at 0.
    """
    if not 0 <= start_level <= 100:
        raise InvalidInputError(f"start_level {start_level} outside [0, 100]")
    if step_s <= 0:
        raise InvalidInputError("step_s must be strictly positive")
    timeline.validate()
    if not timeline.intervals:
        return BatteryCurve(points=(), start_level=start_level)

    step_ms = int(step_s * 1000)
    drained = 0.0
    points: List[Tuple[int, float]] = [(timeline.start_t, start_level)]
    for interval in timeline.intervals:
        rate = profile.rate(interval.state)
        base = drained
        t = interval.t_start + step_ms
        while t < interval.t_end:
            points.append((t, max(0.0, start_level - (base + rate * (t - interval.t_start) / MS_PER_HOUR))))
            t += step_ms
        drained = base + rate * (interval.t_end - interval.t_start) / MS_PER_HOUR
        if interval.t_end > points[-1][0]:
            points.append((interval.t_end, max(0.0, start_level - drained)))

    linear_rate = quad_coeff = None
    unclamped = [p for p in points if p[1] > 0]
    if len(unclamped) >= 3:
        linear_rate, quad_coeff = fit_discharge(unclamped)
    logger.debug(f"Simulated {len(points)} battery samples on {profile.name}: {start_level} -> {points[-1][1]:.2f}")
    return BatteryCurve(points=tuple(points), start_level=start_level,
                        linear_rate=linear_rate, quad_coeff=quad_coeff)


def fit_discharge(samples: Sequence[Tuple[int, float]]) -> Tuple[float, float]:
    """
    Degree-2 least-squares fit of level against hours since the first sample.

    Returns the magnitude of the first-order coefficient (points per hour)
    and the second-order coefficient.
    """
    if len(samples) < 3:
        raise InsufficientDataError(f"discharge fit needs at least 3 samples, got {len(samples)}")
    t = np.array([s[0] for s in samples], dtype=float)
    level = np.array([s[1] for s in samples], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise OrderingError("battery samples must have strictly increasing timestamps")
    hours = (t - t[0]) / MS_PER_HOUR
    quad, linear, _ = np.polyfit(hours, level, 2)
    return abs(float(linear)), float(quad)


def compare_savings(timeline_aware: StateTimeline, timeline_base: StateTimeline,
                    profile: PowerProfile) -> float:
    """Fraction of the baseline consumption saved by the battery-aware timeline."""
    span_aware = (timeline_aware.start_t, timeline_aware.end_t)
    span_base = (timeline_base.start_t, timeline_base.end_t)
    if span_aware != span_base:
        raise SpanMismatchError(f"timelines cover different spans: {span_aware} vs {span_base}")
    base = consumption(timeline_base, profile)
    if base == 0:
        raise InvalidInputError("baseline timeline has zero consumption")
    return 1.0 - consumption(timeline_aware, profile) / base


def timeline_to_csv(timeline: StateTimeline, path: Union[str, Path]) -> None:
    """Write `t_seconds,state` rows: one per interval start plus a closing OFF row."""
    rows = [(i.t_start / 1000.0, i.state.value) for i in timeline.intervals]
    if timeline.intervals:
        rows.append((timeline.end_t / 1000.0, GlobalState.OFF.value))
    pd.DataFrame(rows, columns=['t_seconds', 'state']).to_csv(path, index=False)


def timeline_from_csv(path: Union[str, Path]) -> StateTimeline:
    df = pd.read_csv(path)
    missing = {'t_seconds', 'state'} - set(df.columns)
    if missing:
        raise InvalidInputError(f"{path}: missing columns {sorted(missing)}")
    times = [int(round(t * 1000)) for t in df['t_seconds']]
    states = [GlobalState(s) for s in df['state']]
    intervals = [StateInterval(times[k], times[k + 1], states[k]) for k in range(len(times) - 1)]
    return StateTimeline(intervals).validate()


def curve_to_csv(curve: BatteryCurve, path: Union[str, Path]) -> None:
    pd.DataFrame(
        [(t / 1000.0, level) for t, level in curve.points],
        columns=['t_seconds', 'level_pct'],
    ).to_csv(path, index=False)
