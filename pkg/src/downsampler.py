import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import InvalidInputError, OrderingError
from .geo import LatLon, LocationSample


@dataclass(frozen=True)
class WindowPoint:
    """
    Averaged position of up to W consecutive raw fixes.

    `t` is the timestamp of the last contributing fix; `raw_span` holds the
    stream indices of the first and last contributing fixes.
    """

    t: int
    lat: float
    lon: float
    raw_span: Tuple[int, int]
    complete: bool
    raw: Tuple[LocationSample, ...] = field(repr=False, compare=False)

    @property
    def pos(self) -> LatLon:
        return (self.lat, self.lon)


def average_window(samples: List[LocationSample], first_index: int, complete: bool) -> WindowPoint:
    return WindowPoint(
        t=samples[-1].t,
        lat=float(np.mean([s.lat for s in samples])),
        lon=float(np.mean([s.lon for s in samples])),
        raw_span=(first_index, first_index + len(samples) - 1),
        complete=complete,
        raw=tuple(samples),
    )


class Downsampler:
    """Averaging down-sampler emitting one WindowPoint per W raw fixes."""

    def __init__(self, window: int = 3):
        if window < 1:
            raise InvalidInputError(f"window size must be at least 1, got {window}")
        self.window = window
        self._buffer: List[LocationSample] = []
        self._next_index = 0
        self._last_t: Optional[int] = None
        self.logger = logging.getLogger(__name__)

    @property
    def pending(self) -> int:
        return len(self._buffer)

    def push(self, sample: LocationSample) -> Optional[WindowPoint]:
        if self._last_t is not None and sample.t <= self._last_t:
            raise OrderingError(f"fix at {sample.t} does not follow {self._last_t}")
        self._last_t = sample.t
        self._buffer.append(sample)
        self._next_index += 1
        if len(self._buffer) < self.window:
            return None
        return self._emit(complete=True)

    def flush(self) -> Optional[WindowPoint]:
        """Emit the partial window, if any, and clear the buffer."""
        if not self._buffer:
            return None
        self.logger.debug(f"Flushing partial window of {len(self._buffer)}/{self.window} fixes")
        return self._emit(complete=False)

    def _emit(self, complete: bool) -> WindowPoint:
        first_index = self._next_index - len(self._buffer)
        point = average_window(self._buffer, first_index, complete)
        self._buffer = []
        return point
