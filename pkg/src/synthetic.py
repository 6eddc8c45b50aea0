"""
Seeded synthetic traces.

A scenario is an itinerary of contiguous legs. Fixes carry white Gaussian
position noise and, optionally, canyoning jumps; tunnel legs emit nothing,
indoor legs emit only low satellite counts. The truth diary lists the
intervals of consecutive travel legs (walk, car, tunnel, pause) with
leading and trailing pauses removed.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import InvalidInputError
from .geo import EARTH_RADIUS_M, LocationSample
from .motion_fsm import GRAVITY, AccelSample
from .trace_io import AccelRecording, TraceBundle

logger = logging.getLogger(__name__)

MODES = ('walk', 'car', 'idle', 'pause', 'tunnel', 'indoor')
MOVING_MODES = ('walk', 'car', 'tunnel')
TRAVEL_MODES = ('walk', 'car', 'tunnel', 'pause')
DEFAULT_SPEED = {'walk': 1.4, 'car': 12.0, 'tunnel': 12.0}

# Mean and spread of the accelerometer magnitude deviation from g per mode
ACCEL_PROFILE = {
    'idle': (0.0, 0.03),
    'indoor': (0.0, 0.03),
    'walk': (6.0, 0.8),
    'car': (0.6, 0.3),
    'pause': (0.6, 0.3),
    'tunnel': (0.6, 0.3),
}

METERS_PER_DEGREE = EARTH_RADIUS_M * math.pi / 180.0
DEFAULT_START_T = 1_700_000_000_000


@dataclass(frozen=True)
class Leg:
    mode: str
    duration_s: float
    speed: Optional[float] = None  # m/s, mode default when None
    heading: float = 0.0  # degrees clockwise from north

    @property
    def velocity(self) -> float:
        if self.mode not in MOVING_MODES:
            return 0.0
        return DEFAULT_SPEED[self.mode] if self.speed is None else self.speed


@dataclass(frozen=True)
class SyntheticScenario:
    legs: Tuple[Leg, ...]
    name: str = 'custom'
    origin: Tuple[float, float] = (35.9, 14.5)
    start_t: int = DEFAULT_START_T
    noise_deg: float = 1e-5
    canyon_prob: float = 0.0
    canyon_jump_deg: float = 5e-4
    gps_period_ms: int = 2000
    accel_period_ms: int = 200
    device: str = 'S2'

    def validate(self) -> 'SyntheticScenario':
        if not self.legs:
            raise InvalidInputError("scenario has no legs")
        for leg in self.legs:
            if leg.mode not in MODES:
                raise InvalidInputError(f"unknown leg mode '{leg.mode}'")
            if leg.duration_s <= 0:
                raise InvalidInputError(f"{leg.mode} leg has non-positive duration {leg.duration_s}")
            if leg.speed is not None and leg.speed < 0:
                raise InvalidInputError(f"{leg.mode} leg has negative speed {leg.speed}")
        if self.noise_deg < 0 or not 0 <= self.canyon_prob <= 1:
            raise InvalidInputError("noise_deg must be >= 0 and canyon_prob in [0, 1]")
        if self.gps_period_ms <= 0 or self.accel_period_ms <= 0:
            raise InvalidInputError("sampling periods must be strictly positive")
        return self

    @property
    def boundaries(self) -> List[int]:
        """Leg start times followed by the scenario end, in ms."""
        times = [self.start_t]
        for leg in self.legs:
            times.append(times[-1] + int(round(leg.duration_s * 1000)))
        return times

    @property
    def end_t(self) -> int:
        return self.boundaries[-1]


def truth_diary(scenario: SyntheticScenario) -> List[Tuple[int, int]]:
    bounds = scenario.boundaries
    diary = []
    run: List[int] = []
    for index, leg in enumerate(list(scenario.legs) + [None]):
        if leg is not None and leg.mode in TRAVEL_MODES:
            run.append(index)
            continue
        while run and scenario.legs[run[0]].mode == 'pause':
            run.pop(0)
        while run and scenario.legs[run[-1]].mode == 'pause':
            run.pop()
        if run:
            diary.append((bounds[run[0]], bounds[run[-1] + 1]))
        run = []
    return diary


def _leg_positions(scenario: SyntheticScenario) -> List[Tuple[float, float]]:
    lat, lon = scenario.origin
    starts = [(lat, lon)]
    for leg in scenario.legs:
        distance = leg.velocity * leg.duration_s
        heading = math.radians(leg.heading)
        lat += distance * math.cos(heading) / METERS_PER_DEGREE
        lon += distance * math.sin(heading) / (METERS_PER_DEGREE * math.cos(math.radians(lat)))
        starts.append((lat, lon))
    return starts


def generate_synthetic(scenario: SyntheticScenario, seed: Optional[int] = None
                       ) -> Tuple[TraceBundle, List[Tuple[int, int]]]:
    """Deterministic trace and truth diary for `scenario` under `seed`."""
    scenario.validate()
    rng = np.random.default_rng(seed)
    bounds = np.array(scenario.boundaries, dtype=np.int64)
    starts = _leg_positions(scenario)

    gps_t = np.arange(scenario.start_t, scenario.end_t, scenario.gps_period_ms, dtype=np.int64)
    gps_leg = np.searchsorted(bounds, gps_t, side='right') - 1
    noise = rng.normal(0.0, scenario.noise_deg, size=(len(gps_t), 2)) if scenario.noise_deg else np.zeros((len(gps_t), 2))
    jumps = rng.random(len(gps_t)) < scenario.canyon_prob
    jump_offsets = rng.uniform(-scenario.canyon_jump_deg, scenario.canyon_jump_deg, size=(len(gps_t), 2))
    sats = rng.integers(8, 13, size=len(gps_t))
    indoor_sats = rng.integers(0, 3, size=len(gps_t))

    gps: List[LocationSample] = []
    status: List[Tuple[int, int]] = []
    for k, (t, leg_index) in enumerate(zip(gps_t.tolist(), gps_leg.tolist())):
        leg = scenario.legs[leg_index]
        if leg.mode == 'tunnel':
            continue
        if leg.mode == 'indoor':
            status.append((t, int(indoor_sats[k])))
            continue
        lat0, lon0 = starts[leg_index]
        lat1, lon1 = starts[leg_index + 1]
        frac = (t - bounds[leg_index]) / (bounds[leg_index + 1] - bounds[leg_index])
        lat = lat0 + frac * (lat1 - lat0) + noise[k, 0]
        lon = lon0 + frac * (lon1 - lon0) + noise[k, 1]
        if jumps[k]:
            lat += jump_offsets[k, 0]
            lon += jump_offsets[k, 1]
        gps.append(LocationSample(t=t, lat=float(lat), lon=float(lon), sats=int(sats[k])))

    accel_t = np.arange(scenario.start_t, scenario.end_t, scenario.accel_period_ms, dtype=np.int64)
    accel_leg = np.searchsorted(bounds, accel_t, side='right') - 1
    mean = np.array([ACCEL_PROFILE[scenario.legs[i].mode][0] for i in accel_leg.tolist()])
    spread = np.array([ACCEL_PROFILE[scenario.legs[i].mode][1] for i in accel_leg.tolist()])
    dev = rng.normal(mean, spread) if len(accel_t) else np.empty(0)
    accel = [AccelSample(t=t, ax=0.0, ay=0.0, az=float(GRAVITY + d)) for t, d in zip(accel_t.tolist(), dev.tolist())]

    diary = truth_diary(scenario)
    pings = sorted([(s, 'start') for s, _ in diary] + [(e, 'stop') for _, e in diary])
    bundle = TraceBundle(
        gps=gps, accel=accel, status=status, pings=pings, diary=list(diary),
        metadata={
            'scenario': scenario.name,
            'device': scenario.device,
            'seed': seed,
            'gps_rate_hz': 1000.0 / scenario.gps_period_ms,
            'accel_rate_hz': 1000.0 / scenario.accel_period_ms,
        },
    )
    logger.info(
        f"Synthetic '{scenario.name}': {len(gps)} fixes, {len(accel)} accel samples, {len(diary)} journeys"
    )
    return bundle, diary


def preset_scenario(name: str) -> SyntheticScenario:
    if name == 'walk':
        legs = [Leg('idle', 120), Leg('walk', 900, heading=45), Leg('idle', 600)]
    elif name == 'car-junctions':
        legs = [Leg('idle', 120), Leg('walk', 60, heading=90)]
        for _ in range(3):
            legs += [Leg('car', 300, heading=90), Leg('pause', 60)]
        legs += [Leg('car', 300, heading=90), Leg('walk', 60, heading=90), Leg('idle', 600)]
    elif name == 'tunnel-split':
        legs = [Leg('idle', 120), Leg('walk', 90), Leg('car', 400, speed=15.0), Leg('tunnel', 40, speed=15.0),
                Leg('car', 400, speed=15.0), Leg('walk', 60), Leg('idle', 600)]
    elif name == 'indoor-end':
        legs = [Leg('idle', 120), Leg('walk', 430, heading=30), Leg('indoor', 900)]
    elif name == 'typical-day':
        legs = [Leg('idle', 2 * 3600)]
        for index, gap_h in enumerate((3, 4, 3, 2)):
            # 2 min walk + 26 min drive + 2 min walk
            legs += [Leg('walk', 120, heading=90 * index), Leg('car', 26 * 60, heading=90 * index),
                     Leg('walk', 120, heading=90 * index), Leg('idle', gap_h * 3600)]
    else:
        raise InvalidInputError(f"Unknown scenario preset '{name}' (known: {', '.join(PRESETS)})")
    return SyntheticScenario(legs=tuple(legs), name=name)


PRESETS = ('walk', 'car-junctions', 'tunnel-split', 'indoor-end', 'typical-day')


def random_scenario(rng: np.random.Generator, journeys: Optional[int] = None) -> SyntheticScenario:
    """
    Random itinerary of 1-3 journeys separated by at least 10 minutes of idling.

    Journeys start with at least a minute of walking; car trips may hold
    junction stops of up to 90 s and tunnels of up to 40 s; some end indoors
    after at least 3 minutes of walking.
    """
    count = int(journeys or rng.integers(1, 4))
    legs = [Leg('idle', float(rng.uniform(600, 1800)))]
    for _ in range(count):
        heading = float(rng.uniform(0, 360))
        legs.append(Leg('walk', float(rng.uniform(60, 180)), heading=heading))
        if rng.random() < 0.6:
            for _ in range(int(rng.integers(1, 4))):
                speed = float(rng.uniform(8, 20))
                legs.append(Leg('car', float(rng.uniform(240, 600)), speed=speed, heading=heading))
                stop = rng.random()
                if stop < 0.3:
                    legs.append(Leg('pause', float(rng.uniform(20, 90))))
                elif stop < 0.45:
                    legs.append(Leg('tunnel', float(rng.uniform(10, 40)), speed=speed, heading=heading))
                heading = float((heading + rng.uniform(-60, 60)) % 360)
        else:
            legs.append(Leg('walk', float(rng.uniform(420, 1200)), heading=heading))
        if rng.random() < 0.25:
            legs += [Leg('walk', float(rng.uniform(180, 300)), heading=heading),
                     Leg('indoor', float(rng.uniform(600, 1800)))]
        else:
            legs += [Leg('walk', float(rng.uniform(60, 180)), heading=heading),
                     Leg('idle', float(rng.uniform(600, 1800)))]
    return SyntheticScenario(legs=tuple(legs), name='random')


def generate_accel_corpus(n_runs: int = 20, seed: Optional[int] = None, samples_per_run: int = 100,
                          motion_fraction: float = 0.5, period_ms: int = 200,
                          rest: Tuple[float, float] = (1.5, 0.15),
                          motion: Tuple[float, float] = ACCEL_PROFILE['walk']) -> List[AccelRecording]:
    """
    Labeled accelerometer runs for tuning.

    No-motion runs draw the magnitude deviation from `rest` (a handled but
    stationary phone); motion runs switch to `motion` at an onset drawn from
    the middle of the run.
    """
    if n_runs < 1 or samples_per_run < 2:
        raise InvalidInputError("corpus needs at least one run of at least two samples")
    rng = np.random.default_rng(seed)
    n_motion = int(round(n_runs * motion_fraction))
    recordings = []
    for index in range(n_runs):
        is_motion = index < n_motion
        t = DEFAULT_START_T + index * 10_000_000 + np.arange(samples_per_run, dtype=np.int64) * period_ms
        dev = np.abs(rng.normal(rest[0], rest[1], size=samples_per_run))
        onset_t = None
        if is_motion:
            onset = int(rng.integers(samples_per_run // 5, 3 * samples_per_run // 5))
            dev[onset:] = np.abs(rng.normal(motion[0], motion[1], size=samples_per_run - onset))
            onset_t = int(t[onset])
        samples = [AccelSample(t=ti, ax=0.0, ay=0.0, az=float(GRAVITY + d)) for ti, d in zip(t.tolist(), dev.tolist())]
        label = 'motion' if is_motion else 'rest'
        recordings.append(AccelRecording(f"{label}_{index:03d}", samples, is_motion, onset_t))
    logger.info(f"Generated {n_runs} labeled accelerometer runs ({n_motion} with motion)")
    return recordings


def scenario_summary(scenario: SyntheticScenario) -> Dict[str, float]:
    modes: Dict[str, float] = {}
    for leg in scenario.legs:
        modes[leg.mode] = modes.get(leg.mode, 0.0) + leg.duration_s
    return modes
