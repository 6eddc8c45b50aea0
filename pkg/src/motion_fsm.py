"""
Significant-motion detector used while the GPS is off.

INIT resets the buffers and hands over to CHECK. CHECK averages blocks of n1
filtered samples against a low threshold th1; a hit moves to EXTRA, which
collects n2 samples, splits them into w2 windows and confirms motion only if
every window mean reaches th2.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

from .config import MotionParams
from .errors import OrderingError

GRAVITY = 9.81


@dataclass(frozen=True)
class AccelSample:
    t: int
    ax: float
    ay: float
    az: float


@dataclass(frozen=True)
class FilteredAccel:
    t: int
    mag_dev: float


@dataclass(frozen=True)
class MotionDecision:
    t: int
    samples_seen: int


class MotionState(str, Enum):
    INIT = 'INIT'
    CHECK = 'CHECK'
    EXTRA = 'EXTRA'


def filter_accel(s: AccelSample) -> FilteredAccel:
    """Absolute deviation of the acceleration magnitude from g."""
    return FilteredAccel(t=s.t, mag_dev=abs(math.sqrt(s.ax ** 2 + s.ay ** 2 + s.az ** 2) - GRAVITY))


def block_mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def split_windows(values: Sequence[float], w2: int) -> List[Sequence[float]]:
    """At most w2 contiguous near-equal parts, the longer ones first."""
    k = min(w2, len(values))
    size, extra = divmod(len(values), k)
    parts, start = [], 0
    for index in range(k):
        end = start + size + (1 if index < extra else 0)
        parts.append(values[start:end])
        start = end
    return parts


def extra_floor(values: Sequence[float], w2: int) -> float:
    """Smallest window average of an EXTRA stage."""
    return min(block_mean(part) for part in split_windows(values, w2))


def extra_windows_pass(values: Sequence[float], w2: int, th2: float) -> bool:
    """True when every one of the (at most w2) near-equal windows averages at least th2."""
    return extra_floor(values, w2) >= th2


class MotionFsm:
    def __init__(self, params: Optional[MotionParams] = None):
        self.params = params or MotionParams()
        self.params.validate()
        self.logger = logging.getLogger(__name__)
        self.state = MotionState.INIT
        self._buffer: List[float] = []
        self._last_t: Optional[int] = None
        self.samples_seen = 0
        # Sample count at the most recent rejected EXTRA run, if any
        self.last_rejection: Optional[int] = None
        self.rejections = 0

    def reset(self) -> None:
        self.state = MotionState.INIT
        self._buffer = []

    def on_accel(self, s: AccelSample) -> Optional[MotionDecision]:
        return self.on_filtered(filter_accel(s))

    def on_filtered(self, f: FilteredAccel) -> Optional[MotionDecision]:
        if self._last_t is not None and f.t <= self._last_t:
            raise OrderingError(f"accelerometer sample at {f.t} does not follow {self._last_t}")
        self._last_t = f.t
        self.samples_seen += 1

        if self.state == MotionState.INIT:
            self._buffer = []
            self.state = MotionState.CHECK

        self._buffer.append(f.mag_dev)
        if self.state == MotionState.CHECK:
            if len(self._buffer) < self.params.n1:
                return None
            passed = block_mean(self._buffer) >= self.params.th1
            self._buffer = []
            if passed:
                self.state = MotionState.EXTRA
            return None

        if len(self._buffer) < self.params.n2:
            return None
        confirmed = extra_windows_pass(self._buffer, self.params.w2, self.params.th2)
        self._buffer = []
        if confirmed:
            self.logger.info(f"Significant motion detected at {f.t}")
            self.state = MotionState.INIT
            return MotionDecision(t=f.t, samples_seen=self.samples_seen)
        self.rejections += 1
        self.last_rejection = self.samples_seen
        self.state = MotionState.CHECK
        return None
