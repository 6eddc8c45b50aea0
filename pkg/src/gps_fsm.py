"""
Online GPS logger.

A four-state machine (US_IDLE, US_SRCH, US_FIND, US_LOGD) driven by
down-sampled window points. Start and stop triggers are Markov-chain runs of
M window velocities plus an aggregate speed over the run; stop searching is
deferred until the displacement over the last H windows drops below D_H.
"""
import heapq
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Deque, Iterable, List, Optional, Sequence, Tuple

from .config import GpsFsmParams
from .downsampler import Downsampler, WindowPoint
from .errors import InvalidInputError, OrderingError
from .geo import Journey, LocationSample, haversine

if TYPE_CHECKING:
    from .spool import SegmentSpool


class GpsFsmState(str, Enum):
    US_IDLE = 'US_IDLE'
    US_SRCH = 'US_SRCH'
    US_FIND = 'US_FIND'
    US_LOGD = 'US_LOGD'


class TerminationCause(str, Enum):
    STOP_TRIGGER = 'stop_trigger'
    SIGNAL_TIMEOUT = 'signal_timeout'
    USER_STOP = 'user_stop'


@dataclass(frozen=True)
class SegmentRecord:
    """A tentative journey segment: raw fixes from the start anchor to the closing window."""

    points: Tuple[LocationSample, ...]
    start_window: int
    end_window: int
    cause: TerminationCause

    @property
    def start_t(self) -> int:
        return self.points[0].t

    @property
    def end_t(self) -> int:
        return self.points[-1].t

    def to_journey(self) -> Journey:
        return Journey.from_points(self.points)

    def to_dict(self) -> dict:
        return {
            'start_t': self.start_t,
            'end_t': self.end_t,
            'cause': self.cause.value,
            'start_window': self.start_window,
            'end_window': self.end_window,
            'points': [[p.t, p.lat, p.lon] for p in self.points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SegmentRecord':
        points = tuple(LocationSample(t=int(t), lat=float(lat), lon=float(lon)) for t, lat, lon in data['points'])
        return cls(
            points=points,
            start_window=int(data.get('start_window', -1)),
            end_window=int(data.get('end_window', -1)),
            cause=TerminationCause(data['cause']),
        )


@dataclass
class MarkovChainState:
    """Consecutive windows whose velocity exceeds V_i, capped at M."""

    run_length: int = 0
    anchor: Optional[int] = None

    def advance(self, fast: bool, index: int, m: int) -> None:
        if not fast:
            self.run_length = 0
            self.anchor = None
            return
        if self.run_length == 0:
            self.anchor = index - 1
        self.run_length += 1
        if self.run_length > m:
            self.run_length = m
            self.anchor = index - m

    def complete(self, m: int) -> bool:
        """True once the last M window velocities all exceeded V_i."""
        return self.run_length == m

    def reset(self) -> None:
        self.run_length = 0
        self.anchor = None


class HysteresisBuffer:
    """Ring buffer of the last H window points with their stream indices."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._entries: Deque[Tuple[int, WindowPoint]] = deque(maxlen=capacity)

    def append(self, index: int, window: WindowPoint) -> None:
        self._entries.append((index, window))

    def clear(self) -> None:
        self._entries.clear()

    @property
    def is_full(self) -> bool:
        return len(self._entries) == self.capacity

    def windows(self) -> List[WindowPoint]:
        return [w for _, w in self._entries]

    def indices(self) -> List[int]:
        return [i for i, _ in self._entries]

    def entries(self) -> List[Tuple[int, WindowPoint]]:
        return list(self._entries)

    def displacement(self) -> float:
        if len(self._entries) < 2:
            return 0.0
        return haversine(self._entries[0][1].pos, self._entries[-1][1].pos)

    def __len__(self) -> int:
        return len(self._entries)


def window_speed(a: WindowPoint, b: WindowPoint) -> float:
    if b.t == a.t:
        raise InvalidInputError(f"windows share timestamp {a.t}")
    return haversine(a.pos, b.pos) / (abs(b.t - a.t) / 1000.0)


def check_start_trigger(windows: Sequence[WindowPoint], params: GpsFsmParams) -> Optional[int]:
    """
    Test M+1 windows for a journey start anchored at the first one.

    Every velocity into windows 1..M must exceed V_i and the aggregate speed
    from window 0 to window M must exceed V_c.
    """
    m = params.m
    if len(windows) < m + 1:
        raise InvalidInputError(f"start trigger needs {m + 1} windows, got {len(windows)}")
    run = windows[:m + 1]
    if any(window_speed(run[n - 1], run[n]) <= params.v_i for n in range(1, m + 1)):
        return None
    if window_speed(run[0], run[m]) <= params.v_c:
        return None
    return 0


def find_start(windows: Sequence[WindowPoint], params: GpsFsmParams) -> Optional[int]:
    """First anchor in `windows` that satisfies the start trigger."""
    for a in range(len(windows) - params.m):
        if check_start_trigger(windows[a:a + params.m + 1], params) is not None:
            return a
    return None


def displacement_gate_open(windows: Sequence[WindowPoint], params: GpsFsmParams) -> bool:
    if len(windows) < 2:
        return True
    return haversine(windows[0].pos, windows[-1].pos) < params.d_h


def find_stop(windows: Sequence[WindowPoint], params: GpsFsmParams) -> Optional[int]:
    """Scan oldest-first for the last moving window s: v_{s+1..s+M} < V_i and slow aggregate."""
    m = params.m
    for s in range(len(windows) - m):
        if all(window_speed(windows[n - 1], windows[n]) < params.v_i for n in range(s + 1, s + m + 1)) \
                and window_speed(windows[s], windows[s + m]) < params.v_c:
            return s
    return None


def check_stop_trigger(buffer: Sequence[WindowPoint], params: GpsFsmParams,
                       require_gate: bool = True) -> Optional[int]:
    """Stop index within `buffer`, searched only once the displacement gate opens."""
    if require_gate and not displacement_gate_open(buffer, params):
        return None
    return find_stop(buffer, params)


class GpsFsm:
    """
    Online journey segmenter over a stream of fixes.

    Feed raw fixes through `on_fix` (or windows through `on_window`), satellite
    readings through `on_signal_status` and lost-fix timeouts through
    `on_watchdog`. Completed segments are returned and, when a spool is
    attached, appended to it.
    """

    def __init__(self, params: Optional[GpsFsmParams] = None, window: int = 3,
                 spool: Optional['SegmentSpool'] = None):
        self.params = params or GpsFsmParams()
        self.params.validate()
        self.downsampler = Downsampler(window)
        self.spool = spool
        self.logger = logging.getLogger(__name__)

        self.state = GpsFsmState.US_IDLE
        self.markov = MarkovChainState()
        self.buffer = HysteresisBuffer(self.params.h)
        self._recent: Deque[Tuple[int, WindowPoint]] = deque(maxlen=self.params.m + 1)
        self._segment: List[Tuple[int, WindowPoint]] = []
        self._window_count = 0
        self._last_window_t: Optional[int] = None
        self._closed_upto = -1

        self._low_since: Optional[int] = None
        self._signal_fired = False
        self._last_fix_t: Optional[int] = None
        self._watchdog_fired = False

    @property
    def start_ptr(self) -> Optional[int]:
        """Stream index of the window anchoring the open segment."""
        return self._segment[0][0] if self._segment else None

    @property
    def journey_active(self) -> bool:
        return self.state in (GpsFsmState.US_FIND, GpsFsmState.US_LOGD)

    @property
    def watchdog_deadline(self) -> Optional[int]:
        if self._last_fix_t is None or self._watchdog_fired:
            return None
        return self._last_fix_t + int(self.params.watchdog_timeout * 1000)

    def arm_watchdog(self, t: int) -> None:
        """Start the lost-fix clock at `t` (e.g. when the receiver is switched on)."""
        self._last_fix_t = t
        self._watchdog_fired = False

    def on_fix(self, sample: LocationSample) -> List[SegmentRecord]:
        closed = self.poll_watchdog(sample.t)
        if sample.sats is not None:
            closed.extend(self.on_signal_status(sample.t, sample.sats))
        self._last_fix_t = sample.t
        self._watchdog_fired = False
        window = self.downsampler.push(sample)
        if window is not None:
            closed.extend(self.on_window(window))
        return closed

    def poll_watchdog(self, now: int) -> List[SegmentRecord]:
        """Fire the watchdog if no fix arrived for `watchdog_timeout` before `now`."""
        deadline = self.watchdog_deadline
        if deadline is None or now < deadline:
            return []
        self._watchdog_fired = True
        record = self.on_watchdog(deadline)
        return [record] if record is not None else []

    def on_window(self, w: WindowPoint) -> List[SegmentRecord]:
        index = self._append_window(w)
        closed: List[SegmentRecord] = []

        if self.state == GpsFsmState.US_IDLE:
            if len(self._recent) == self.params.m + 1:
                self._transition(GpsFsmState.US_SRCH)
        elif self.state == GpsFsmState.US_SRCH:
            self._try_start()
        elif self.state == GpsFsmState.US_FIND:
            self._segment.append((index, w))
            if len(self._segment) >= self.params.h:
                self._transition(GpsFsmState.US_LOGD)
        elif self.state == GpsFsmState.US_LOGD:
            self._segment.append((index, w))
            closed.extend(self._check_end())
        return closed

    def on_signal_status(self, t: int, sats: Optional[int]) -> List[SegmentRecord]:
        if sats is None:
            return []
        if sats >= self.params.sat_min:
            self._low_since = None
            self._signal_fired = False
            return []
        if self._low_since is None:
            self._low_since = t
            self.logger.debug(f"Satellite count {sats} below {self.params.sat_min} at {t}")
        if self._signal_fired or t - self._low_since < self.params.sat_timeout * 1000:
            return []
        self._signal_fired = True
        self.logger.info(f"Satellite signal lost for {(t - self._low_since) / 1000:.0f}s in {self.state.value}")
        record = self._close_on_timeout(TerminationCause.SIGNAL_TIMEOUT)
        return [record] if record is not None else []

    def on_watchdog(self, t: int) -> Optional[SegmentRecord]:
        self.logger.info(f"Watchdog fired at {t} in {self.state.value}")
        return self._close_on_timeout(TerminationCause.SIGNAL_TIMEOUT)

    def stop(self, t: int) -> Optional[SegmentRecord]:
        """User stop: close any open segment and return to US_IDLE."""
        closed = self.poll_watchdog(t)
        record = closed[0] if closed else None
        partial = self.downsampler.flush()
        if self.journey_active:
            if partial is not None:
                self._segment.append((self._append_window(partial), partial))
            end_index = self._segment[-1][0]
            if self.state == GpsFsmState.US_LOGD:
                stop = find_stop(self.buffer.windows(), self.params)
                if stop is not None:
                    end_index = self.buffer.indices()[stop]
            record = self._close_segment(end_index, TerminationCause.USER_STOP)
        self._flush()
        return record

    def _append_window(self, w: WindowPoint) -> int:
        if self._last_window_t is not None and w.t <= self._last_window_t:
            raise OrderingError(f"window at {w.t} does not follow {self._last_window_t}")
        previous = self._recent[-1][1] if self._recent else None
        self._last_window_t = w.t
        index = self._window_count
        self._window_count += 1
        self._recent.append((index, w))
        self.buffer.append(index, w)
        if previous is not None:
            self.markov.advance(window_speed(previous, w) > self.params.v_i, index, self.params.m)
        return index

    def _try_start(self) -> None:
        anchor = self.markov.anchor
        if not self.markov.complete(self.params.m) or anchor is None or anchor <= self._closed_upto:
            return
        entries = list(self._recent)
        if window_speed(entries[0][1], entries[-1][1]) > self.params.v_c:
            self._open_segment(entries)

    def _open_segment(self, entries: List[Tuple[int, WindowPoint]]) -> None:
        self._segment = list(entries)
        self.logger.debug(f"Start trigger at window {entries[0][0]} (t={entries[0][1].t})")
        self._transition(GpsFsmState.US_FIND)

    def _check_end(self) -> List[SegmentRecord]:
        windows = self.buffer.windows()
        if not self.buffer.is_full or not displacement_gate_open(windows, self.params):
            return []
        entries = self.buffer.entries()
        stop = find_stop(windows, self.params)
        if stop is None:
            record = self._close_segment(self._segment[-1][0], TerminationCause.STOP_TRIGGER)
            self._transition(GpsFsmState.US_SRCH)
            return [record] if record is not None else []

        record = self._close_segment(entries[stop][0], TerminationCause.STOP_TRIGGER)
        rest = entries[stop + 1:]
        anchor = find_start([w for _, w in rest], self.params)
        if anchor is not None:
            self._open_segment(rest[anchor:])
        else:
            self._transition(GpsFsmState.US_SRCH)
        return [record] if record is not None else []

    def _close_on_timeout(self, cause: TerminationCause) -> Optional[SegmentRecord]:
        partial = self.downsampler.flush()
        record = None
        if self.state == GpsFsmState.US_LOGD:
            if partial is not None:
                self._segment.append((self._append_window(partial), partial))
            stop = check_stop_trigger(self.buffer.windows(), self.params, require_gate=False)
            end_index = self.buffer.indices()[stop] if stop is not None else self._segment[-1][0]
            record = self._close_segment(end_index, cause)
        self._flush()
        return record

    def _close_segment(self, end_index: int, cause: TerminationCause) -> Optional[SegmentRecord]:
        kept = [(i, w) for i, w in self._segment if i <= end_index]
        self._segment = []
        self._closed_upto = max(self._closed_upto, end_index)
        points = tuple(sample for _, w in kept for sample in w.raw)
        if len(points) < 2:
            self.logger.debug(f"Dropping segment ending at window {end_index}: fewer than 2 fixes")
            return None
        record = SegmentRecord(points=points, start_window=kept[0][0], end_window=kept[-1][0], cause=cause)
        self.logger.info(
            f"Segment closed ({cause.value}): {len(points)} fixes, "
            f"{record.start_t} -> {record.end_t}"
        )
        if self.spool is not None:
            self.spool.append(record)
        return record

    def _flush(self) -> None:
        self.downsampler.flush()
        self.buffer.clear()
        self._recent.clear()
        self._segment = []
        self.markov.reset()
        self._transition(GpsFsmState.US_IDLE)

    def _transition(self, state: GpsFsmState) -> None:
        if state != self.state:
            self.logger.debug(f"{self.state.value} -> {state.value}")
            self.state = state


def run_gps_logger(fixes: Iterable[LocationSample], status: Iterable[Tuple[int, int]] = (),
                   params: Optional[GpsFsmParams] = None, window: int = 3,
                   stop_t: Optional[int] = None,
                   spool: Optional['SegmentSpool'] = None) -> List[SegmentRecord]:
    """
    Replay fixes and satellite readings through a fresh GpsFsm.

    Events are merged by timestamp with fixes first on ties. The watchdog is
    polled before every event; `stop_t` issues a user stop at the end.
    """
    fsm = GpsFsm(params, window, spool)
    fix_events = ((s.t, 0, s) for s in fixes)
    status_events = ((t, 1, sats) for t, sats in status)
    segments: List[SegmentRecord] = []
    started = False
    for t, kind, payload in heapq.merge(fix_events, status_events, key=lambda e: (e[0], e[1])):
        if not started:
            fsm.arm_watchdog(t)
            started = True
        if kind == 0:
            segments.extend(fsm.on_fix(payload))
        else:
            segments.extend(fsm.poll_watchdog(t))
            segments.extend(fsm.on_signal_status(t, payload))
    if stop_t is not None:
        record = fsm.stop(stop_t)
        if record is not None:
            segments.append(record)
    return segments
