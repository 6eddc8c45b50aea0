import pytest

from src.config import PipelineConfig
from src.controller import (Controller, GlobalState, StateInterval, StateTimeline, TimelineRecorder,
                            run_controller, session_span)
from src.errors import InvalidInputError, OrderingError
from src.geo import LocationSample
from src.gps_fsm import TerminationCause, run_gps_logger
from src.postproc import postprocess
from src.power import compare_savings, get_profile
from src.synthetic import Leg, SyntheticScenario, generate_synthetic, preset_scenario
from src.validation import Detection, validate_detection

from .conftest import T0, accel_stream, build_fixes


def states_of(timeline):
    return [i.state for i in timeline.intervals]


class TestTimeline:
    def test_from_durations(self):
        timeline = StateTimeline.from_durations(T0, [(GlobalState.GPS, 1.0), (GlobalState.ACC, 0.5)])
        assert timeline.start_t == T0
        assert timeline.end_t == T0 + 5_400_000
        assert timeline.time_in(GlobalState.GPS) == 3600.0
        assert timeline.time_in(GlobalState.ACC) == 1800.0
        assert timeline.time_in(GlobalState.OFF) == 0.0

    def test_gap_is_rejected(self):
        timeline = StateTimeline([StateInterval(T0, T0 + 10, GlobalState.GPS),
                                  StateInterval(T0 + 20, T0 + 30, GlobalState.ACC)])
        with pytest.raises(OrderingError):
            timeline.validate()

    def test_concat(self):
        first = StateTimeline.single(T0, T0 + 1000, GlobalState.GPS)
        second = StateTimeline.single(T0 + 1000, T0 + 3000, GlobalState.ACC)
        assert first.concat(second).time_in(GlobalState.ACC) == 2.0
        with pytest.raises(OrderingError):
            second.concat(first)

    def test_recorder(self):
        recorder = TimelineRecorder(T0, GlobalState.OFF)
        recorder.switch(T0, GlobalState.GPS)
        recorder.switch(T0 + 1000, GlobalState.ACC)
        recorder.switch(T0 + 1000, GlobalState.GPS)
        timeline = recorder.close(T0 + 5000)
        assert timeline.intervals == [StateInterval(T0, T0 + 1000, GlobalState.GPS),
                                      StateInterval(T0 + 1000, T0 + 5000, GlobalState.GPS)]
        assert recorder.state == GlobalState.OFF

    def test_recorder_rejects_illegal_transition(self):
        recorder = TimelineRecorder(T0, GlobalState.OFF)
        with pytest.raises(InvalidInputError):
            recorder.switch(T0 + 1, GlobalState.ACC)


class TestController:
    def test_idle_session_switches_to_accelerometer(self):
        scenario = SyntheticScenario(legs=(Leg('idle', 7200),))
        bundle, _ = generate_synthetic(scenario, seed=1)
        result = Controller().run(bundle.gps, bundle.accel, bundle.status)
        start, stop = session_span(bundle.gps, bundle.accel, bundle.status)
        assert result.journeys == []
        assert result.timeline.intervals == [
            StateInterval(start, start + 300_000, GlobalState.GPS),
            StateInterval(start + 300_000, stop, GlobalState.ACC),
        ]

    def test_walk_is_detected(self):
        scenario = preset_scenario('walk')
        bundle, diary = generate_synthetic(scenario, seed=3)
        result = run_controller(bundle.gps, bundle.accel, bundle.status)
        assert len(result.journeys) == 1
        journey = result.journeys[0]
        assert abs(journey.start_t - diary[0][0]) < 20_000
        assert abs(journey.end_t - diary[0][1]) < 20_000
        assert states_of(result.timeline) == [GlobalState.GPS, GlobalState.ACC]
        report = validate_detection(result.journeys, diary)
        assert report.count(Detection.FULL) == 1

    def test_motion_wakes_the_gps(self):
        scenario = SyntheticScenario(legs=(Leg('idle', 600), Leg('walk', 600), Leg('idle', 600)))
        bundle, diary = generate_synthetic(scenario, seed=4)
        result = Controller().run(bundle.gps, bundle.accel, bundle.status)
        timeline = result.timeline
        assert states_of(timeline) == [GlobalState.GPS, GlobalState.ACC, GlobalState.GPS, GlobalState.ACC]
        wake = timeline.intervals[2].t_start
        assert 0 <= wake - diary[0][0] <= 5000
        assert len(result.journeys) == 1
        assert validate_detection(result.journeys, diary).count(Detection.FULL) == 1
        timeline.validate()

    def test_reacquisition_delay(self):
        scenario = SyntheticScenario(legs=(Leg('idle', 600), Leg('walk', 600), Leg('idle', 600)))
        bundle, _ = generate_synthetic(scenario, seed=4)
        config = PipelineConfig().with_overrides({'controller': {'reacquisition_delay': 30.0}})
        result = Controller(config).run(bundle.gps, bundle.accel, bundle.status)
        wake = result.timeline.intervals[2].t_start
        assert result.journeys
        assert result.journeys[0].start_t >= wake + 30_000

    def test_lost_fixes_close_journey_between_accel_samples(self):
        """Fixes stop mid-walk with no satellite readings: accelerometer samples still drive the watchdog."""
        fixes = build_fixes([(30, 0.0), (300, 2.0)])
        accel = accel_stream([0.0] * 36_000)
        result = Controller().run(fixes, accel)
        watchdog_at = fixes[-1].t + 60_000
        switch_at = watchdog_at + 300_000
        assert result.timeline.intervals == [
            StateInterval(T0, switch_at, GlobalState.GPS),
            StateInterval(switch_at, accel[-1].t, GlobalState.ACC),
        ]
        assert [s.cause for s in result.segments] == [TerminationCause.SIGNAL_TIMEOUT]
        assert len(result.journeys) == 1
        assert result.journeys[0].end_t == fixes[-1].t

    def test_always_on_matches_plain_logger(self):
        """With the idle timeout disabled the controller is the GPS logger plus post-processing."""
        bundle, _ = generate_synthetic(preset_scenario('indoor-end'), seed=11)
        config = PipelineConfig().with_overrides({'controller': {'battery_aware': False}})
        session = session_span(bundle.gps, (), bundle.status)
        result = Controller(config).run(bundle.gps, (), bundle.status, session)

        segments = run_gps_logger(bundle.gps, bundle.status, config.gps, config.window, stop_t=session[1])
        expected = postprocess([s.to_journey() for s in segments], config.postproc)
        assert len(expected) == 1
        assert result.segments == segments
        assert result.journeys == expected
        assert result.timeline.intervals == [StateInterval(session[0], session[1], GlobalState.GPS)]

    def test_typical_day_saves_battery(self):
        bundle, diary = generate_synthetic(preset_scenario('typical-day'), seed=7)
        result = Controller().run(bundle.gps, bundle.accel, bundle.status)
        timeline = result.timeline
        base = StateTimeline.single(timeline.start_t, timeline.end_t, GlobalState.GPS)
        savings = compare_savings(timeline, base, get_profile('S2'))
        assert 0.5 < savings < 0.7
        report = validate_detection(result.journeys, diary)
        assert report.count(Detection.MISSED) == 0

    def test_events_outside_session_are_ignored(self, journey_fixes):
        session = (journey_fixes[30].t, journey_fixes[-1].t)
        config = PipelineConfig().with_overrides({'controller': {'battery_aware': False}})
        clipped = Controller(config).run(journey_fixes, session=session)
        direct = Controller(config).run(journey_fixes[30:], session=session)
        assert clipped.segments == direct.segments
        assert clipped.timeline.start_t == session[0]


class TestControllerErrors:
    def test_unordered_fixes(self):
        fixes = build_fixes([(3, 0.0)])
        with pytest.raises(OrderingError):
            Controller().run([fixes[1], fixes[0]])

    def test_unordered_accel(self):
        samples = accel_stream([0.0, 0.0])
        with pytest.raises(OrderingError):
            Controller().run([], [samples[1], samples[0]])

    def test_inverted_session(self):
        with pytest.raises(InvalidInputError):
            Controller().run(build_fixes([(3, 0.0)]), session=(T0 + 10, T0))

    def test_empty_streams(self):
        with pytest.raises(InvalidInputError):
            Controller().run([])

    def test_accel_only_session(self):
        result = Controller().run([], accel_stream([0.0] * 10))
        assert result.journeys == []
        assert states_of(result.timeline) == [GlobalState.GPS]


def test_session_span():
    fixes = [LocationSample(T0 + 1000, 35.9, 14.5), LocationSample(T0 + 5000, 35.9, 14.5)]
    assert session_span(fixes, accel_stream([0.0], start_t=T0), [(T0 + 9000, 3)]) == (T0, T0 + 9000)
