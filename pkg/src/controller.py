"""
Global OFF/GPS/ACC controller.

Replays GPS fixes, satellite readings and accelerometer samples as a single
time-ordered event stream. In GPS the journey FSM runs; after `idle_timeout`
seconds with no active journey the GPS is switched off and the motion FSM
watches the accelerometer until it confirms significant motion. Spooled
segments are post-processed on every GPS -> ACC switch and at stop.
"""
import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from .config import PipelineConfig
from .errors import InvalidInputError, OrderingError
from .geo import Journey, LocationSample, check_strictly_increasing
from .gps_fsm import GpsFsm, GpsFsmState, SegmentRecord
from .motion_fsm import AccelSample, MotionFsm
from .postproc import PostProcessor
from .spool import SegmentSpool


class GlobalState(str, Enum):
    OFF = 'OFF'
    GPS = 'GPS'
    ACC = 'ACC'


_ALLOWED = {
    GlobalState.OFF: {GlobalState.GPS},
    GlobalState.GPS: {GlobalState.ACC, GlobalState.OFF},
    GlobalState.ACC: {GlobalState.GPS, GlobalState.OFF},
}


@dataclass(frozen=True)
class StateInterval:
    t_start: int
    t_end: int
    state: GlobalState

    @property
    def duration_s(self) -> float:
        return (self.t_end - self.t_start) / 1000.0


@dataclass
class StateTimeline:
    """Contiguous, non-overlapping sensor-state intervals."""

    intervals: List[StateInterval] = field(default_factory=list)

    @classmethod
    def single(cls, start_t: int, end_t: int, state: GlobalState) -> 'StateTimeline':
        return cls([StateInterval(start_t, end_t, state)])

    @classmethod
    def from_durations(cls, start_t: int, parts: Sequence[Tuple[GlobalState, float]]) -> 'StateTimeline':
        """Build a timeline from consecutive (state, hours) parts."""
        intervals = []
        t = start_t
        for state, hours in parts:
            end = t + int(round(hours * 3_600_000))
            intervals.append(StateInterval(t, end, state))
            t = end
        return cls(intervals)

    @property
    def start_t(self) -> Optional[int]:
        return self.intervals[0].t_start if self.intervals else None

    @property
    def end_t(self) -> Optional[int]:
        return self.intervals[-1].t_end if self.intervals else None

    def time_in(self, state: GlobalState) -> float:
        return sum(i.duration_s for i in self.intervals if i.state == state)

    def validate(self) -> 'StateTimeline':
        for prev, cur in zip(self.intervals, self.intervals[1:]):
            if cur.t_start != prev.t_end:
                raise OrderingError(f"timeline gap or overlap at {prev.t_end} -> {cur.t_start}")
        for interval in self.intervals:
            if interval.t_end < interval.t_start:
                raise OrderingError(f"interval ends before it starts at {interval.t_start}")
        return self

    def concat(self, other: 'StateTimeline') -> 'StateTimeline':
        return StateTimeline(self.intervals + other.intervals).validate()


class TimelineRecorder:
    def __init__(self, start_t: int, state: GlobalState):
        self.intervals: List[StateInterval] = []
        self._since = start_t
        self.state = state

    def switch(self, t: int, state: GlobalState) -> None:
        if state not in _ALLOWED[self.state]:
            raise InvalidInputError(f"illegal controller transition {self.state.value} -> {state.value}")
        if t > self._since:
            self.intervals.append(StateInterval(self._since, t, self.state))
            self._since = t
        self.state = state

    def close(self, t: int) -> StateTimeline:
        if t > self._since:
            self.intervals.append(StateInterval(self._since, t, self.state))
        self._since = t
        self.state = GlobalState.OFF
        return StateTimeline(list(self.intervals))


@dataclass
class ControllerResult:
    journeys: List[Journey]
    timeline: StateTimeline
    segments: List[SegmentRecord]


_FIX, _STATUS, _ACCEL = 0, 1, 2


class Controller:
    """Battery-aware replay of one tracking session."""

    def __init__(self, config: Optional[PipelineConfig] = None,
                 spool_path: Optional[Union[str, Path]] = None):
        self.config = (config or PipelineConfig.default_config()).validate()
        self.spool_path = spool_path
        self.postprocessor = PostProcessor(self.config.postproc)
        self.logger = logging.getLogger(__name__)

    def run(self, gps: Sequence[LocationSample], accel: Sequence[AccelSample] = (),
            status: Sequence[Tuple[int, int]] = (),
            session: Optional[Tuple[int, int]] = None) -> ControllerResult:
        check_strictly_increasing([s.t for s in gps], 'GPS fixes')
        check_strictly_increasing([a.t for a in accel], 'accelerometer samples')
        check_strictly_increasing([t for t, _ in status], 'satellite readings')
        if session is None:
            session = session_span(gps, accel, status)
        start_t, stop_t = session
        if stop_t < start_t:
            raise InvalidInputError(f"session stop {stop_t} precedes start {start_t}")

        self._journeys: List[Journey] = []
        self._segments: List[SegmentRecord] = []
        self._motion: Optional[MotionFsm] = None
        self._fsm: Optional[GpsFsm] = None
        timeout = self.config.controller.effective_idle_timeout
        self._idle_timeout_ms = math.inf if math.isinf(timeout) else int(timeout * 1000)

        with SegmentSpool(self.spool_path) as spool:
            self._spool = spool
            self._timeline = TimelineRecorder(start_t, GlobalState.OFF)
            self._enter_gps(start_t)

            events = heapq.merge(
                ((s.t, _FIX, s) for s in gps),
                ((t, _STATUS, sats) for t, sats in status),
                ((a.t, _ACCEL, a) for a in accel),
                key=lambda e: (e[0], e[1]),
            )
            for t, kind, payload in events:
                if t < start_t:
                    continue
                if t > stop_t:
                    break
                self._check_idle_timeout(t)
                if self._timeline.state == GlobalState.GPS:
                    self._on_gps_event(t, kind, payload)
                elif kind == _ACCEL:
                    decision = self._motion.on_accel(payload)
                    if decision is not None:
                        self._enter_gps(decision.t)

            self._check_idle_timeout(stop_t)
            if self._timeline.state == GlobalState.GPS:
                self._collect(self._fsm.stop(stop_t))
            self._run_postproc(stop_t)
            timeline = self._timeline.close(stop_t)

        journeys = sorted(self._journeys, key=lambda j: j.start_t)
        self.logger.info(
            f"Session {start_t}-{stop_t}: {len(journeys)} journeys, "
            f"GPS {timeline.time_in(GlobalState.GPS) / 3600:.2f}h, "
            f"ACC {timeline.time_in(GlobalState.ACC) / 3600:.2f}h"
        )
        return ControllerResult(journeys=journeys, timeline=timeline, segments=self._segments)

    def _on_gps_event(self, t: int, kind: int, payload) -> None:
        if t < self._gps_ready_t:
            return
        idle_from = t
        deadline = self._fsm.watchdog_deadline
        was_active = self._fsm.journey_active
        self._collect(self._fsm.poll_watchdog(t))
        if was_active and not self._fsm.journey_active and deadline is not None:
            idle_from = deadline
        if kind == _FIX:
            self._collect(self._fsm.on_fix(payload))
        elif kind == _STATUS:
            self._collect(self._fsm.on_signal_status(t, payload))
        if self._fsm.state in (GpsFsmState.US_IDLE, GpsFsmState.US_SRCH):
            if self._idle_since is None:
                self._idle_since = idle_from
        else:
            self._idle_since = None

    def _check_idle_timeout(self, t: int) -> None:
        if self._timeline.state != GlobalState.GPS or self._idle_since is None:
            return
        deadline = self._idle_since + self._idle_timeout_ms
        if t >= deadline:
            self._enter_acc(int(deadline))

    def _enter_gps(self, t: int) -> None:
        self._timeline.switch(t, GlobalState.GPS)
        self._fsm = GpsFsm(self.config.gps, self.config.window, self._spool)
        self._gps_ready_t = t + int(self.config.controller.reacquisition_delay * 1000)
        self._fsm.arm_watchdog(self._gps_ready_t)
        self._idle_since = t
        self._motion = None
        self.logger.info(f"GPS on at {t}")

    def _enter_acc(self, t: int) -> None:
        self._timeline.switch(t, GlobalState.ACC)
        self._fsm = None
        self._idle_since = None
        self._motion = MotionFsm(self.config.motion)
        self.logger.info(f"No journey for {self.config.controller.idle_timeout:.0f}s, GPS off at {t}")
        self._run_postproc(t)

    def _run_postproc(self, t: int) -> None:
        records = self._spool.drain()
        if not records:
            return
        journeys = self.postprocessor.run_pipeline(r.to_journey() for r in records)
        self.logger.debug(f"Post-processing at {t}: {len(records)} segments -> {len(journeys)} journeys")
        self._journeys.extend(journeys)

    def _collect(self, records) -> None:
        if records is None:
            return
        if isinstance(records, SegmentRecord):
            records = [records]
        self._segments.extend(records)


def session_span(gps: Sequence[LocationSample], accel: Sequence[AccelSample] = (),
                 status: Sequence[Tuple[int, int]] = ()) -> Tuple[int, int]:
    times = [seq[i].t for seq in (gps, accel) if seq for i in (0, -1)]
    times += [status[i][0] for i in (0, -1)] if status else []
    if not times:
        raise InvalidInputError("cannot derive a session span from empty traces")
    return min(times), max(times)


def run_controller(gps: Sequence[LocationSample], accel: Sequence[AccelSample] = (),
                   status: Sequence[Tuple[int, int]] = (), session: Optional[Tuple[int, int]] = None,
                   config: Optional[PipelineConfig] = None) -> ControllerResult:
    return Controller(config).run(gps, accel, status, session)
