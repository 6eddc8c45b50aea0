import numpy as np
import pandas as pd
import pytest

from src.controller import GlobalState, StateTimeline
from src.errors import InsufficientDataError, InvalidInputError, OrderingError, SpanMismatchError
from src.power import (DEVICE_PRESETS, GPS_MODE_RATES, MS_PER_HOUR, GpsMode, PowerProfile, compare_savings,
                       consumption, curve_to_csv, fit_discharge, get_profile, simulate_battery,
                       timeline_from_csv, timeline_to_csv)

from .conftest import T0


@pytest.fixture
def s2():
    return get_profile('S2')


class TestProfiles:
    def test_presets_are_ordered(self):
        for profile in DEVICE_PRESETS.values():
            assert profile.idle_rate <= profile.accel_rate <= profile.gps_rate

    def test_lookup_is_case_insensitive(self, s2):
        assert get_profile('s2') is s2
        with pytest.raises(InvalidInputError):
            get_profile('X9')

    def test_rates_per_state(self, s2):
        assert s2.rate(GlobalState.GPS) == 28.26
        assert s2.rate(GlobalState.ACC) == 7.42
        assert s2.rate(GlobalState.OFF) == 2.17

    def test_gps_mode_scales_gps_only(self, s2):
        indoor = s2.with_gps_mode('indoor')
        ratio = GPS_MODE_RATES[GpsMode.INDOOR] / GPS_MODE_RATES[GpsMode.OUTDOOR]
        assert indoor.rate(GlobalState.GPS) == pytest.approx(28.26 * ratio)
        assert indoor.rate(GlobalState.ACC) == s2.rate(GlobalState.ACC)
        assert s2.with_gps_mode(GpsMode.OUTDOOR).rate(GlobalState.GPS) == s2.rate(GlobalState.GPS)

    def test_invalid_profile(self):
        with pytest.raises(InvalidInputError):
            PowerProfile('bad', idle_rate=5.0, accel_rate=3.0, gps_rate=10.0)
        with pytest.raises(InvalidInputError):
            PowerProfile('bad', idle_rate=1.0, accel_rate=3.0, gps_rate=10.0, gps_multiplier=0.5)


class TestSimulation:
    def test_consumption(self, s2):
        timeline = StateTimeline.from_durations(T0, [(GlobalState.GPS, 1.0), (GlobalState.ACC, 1.0)])
        assert consumption(timeline, s2) == pytest.approx(28.26 + 7.42)

    def test_idle_drain(self):
        timeline = StateTimeline.from_durations(T0, [(GlobalState.OFF, 10.0)])
        curve = simulate_battery(timeline, get_profile('T2'))
        assert curve.final_level == pytest.approx(89.4)
        assert curve.level_at(T0 + 5 * MS_PER_HOUR) == pytest.approx(94.7)

    def test_sampling_and_monotonicity(self, s2):
        timeline = StateTimeline.from_durations(T0, [(GlobalState.GPS, 1.0), (GlobalState.ACC, 0.5)])
        curve = simulate_battery(timeline, s2, step_s=60)
        assert len(curve.points) == 1 + 60 + 30
        levels = [level for _, level in curve.points]
        assert all(b <= a for a, b in zip(levels, levels[1:]))
        assert curve.points[-1][0] == timeline.end_t

    def test_clamped_at_zero(self):
        timeline = StateTimeline.from_durations(T0, [(GlobalState.GPS, 3.0)])
        curve = simulate_battery(timeline, get_profile('S1'))
        assert curve.final_level == 0.0
        assert min(level for _, level in curve.points) == 0.0
        assert curve.linear_rate == pytest.approx(47.97, rel=1e-6)

    def test_fit_recovers_single_state_rate(self, s2):
        timeline = StateTimeline.from_durations(T0, [(GlobalState.GPS, 2.0)])
        curve = simulate_battery(timeline, s2)
        assert curve.linear_rate == pytest.approx(28.26, rel=1e-6)
        assert curve.quad_coeff == pytest.approx(0.0, abs=1e-6)

    def test_empty_timeline(self, s2):
        curve = simulate_battery(StateTimeline(), s2, start_level=80)
        assert curve.points == ()
        assert curve.final_level == 80
        assert curve.linear_rate is None

    def test_invalid_arguments(self, s2):
        timeline = StateTimeline.from_durations(T0, [(GlobalState.GPS, 1.0)])
        with pytest.raises(InvalidInputError):
            simulate_battery(timeline, s2, start_level=120)
        with pytest.raises(InvalidInputError):
            simulate_battery(timeline, s2, step_s=0)


class TestFit:
    def test_quadratic_fit(self):
        samples = [(T0 + int(h * MS_PER_HOUR), 100 - 5 * h - 0.5 * h * h) for h in (0, 1, 2, 3, 4, 5)]
        linear, quad = fit_discharge(samples)
        assert linear == pytest.approx(5.0)
        assert quad == pytest.approx(-0.5)

    def test_needs_three_samples(self):
        with pytest.raises(InsufficientDataError):
            fit_discharge([(T0, 100.0), (T0 + 1000, 99.0)])

    def test_needs_ordered_samples(self):
        with pytest.raises(OrderingError):
            fit_discharge([(T0, 100.0), (T0 + 2000, 99.0), (T0 + 1000, 98.0)])

    @pytest.mark.parametrize('rate', [1.79, 1.06, 5.02, 2.17])
    def test_recovers_planted_rates(self, rate):
        t = T0 + np.arange(15 * 3600) * 1000
        hours = (t - T0) / MS_PER_HOUR
        clean = [(int(ti), 100.0 - rate * h) for ti, h in zip(t, hours)]
        linear, quad = fit_discharge(clean)
        assert linear == pytest.approx(rate, abs=1e-6)
        assert abs(quad) < 1e-6

        rng = np.random.default_rng(int(rate * 100))
        noisy = [(ti, level + float(e)) for (ti, level), e in zip(clean, rng.normal(0, 0.5, len(clean)))]
        linear, _ = fit_discharge(noisy)
        assert linear == pytest.approx(rate, rel=0.02)

    def test_small_curvature_stays_small(self):
        rate = 2.17
        t = T0 + np.arange(901) * 60_000
        hours = (t - T0) / MS_PER_HOUR
        samples = [(int(ti), 100.0 - rate * h + 1e-6 * rate * h * h) for ti, h in zip(t, hours)]
        linear, quad = fit_discharge(samples)
        assert linear == pytest.approx(rate, abs=1e-6)
        assert quad == pytest.approx(1e-6 * rate, abs=1e-9)
        assert abs(quad) < 1e-5 * linear


class TestSavings:
    def test_always_on_saves_nothing(self, s2):
        base = StateTimeline.single(T0, T0 + MS_PER_HOUR, GlobalState.GPS)
        assert compare_savings(base, base, s2) == 0.0

    def test_savings(self, s2):
        aware = StateTimeline.from_durations(T0, [(GlobalState.GPS, 1.0), (GlobalState.ACC, 3.0)])
        base = StateTimeline.single(T0, aware.end_t, GlobalState.GPS)
        expected = 1 - (28.26 + 3 * 7.42) / (4 * 28.26)
        assert compare_savings(aware, base, s2) == pytest.approx(expected)

    def test_span_mismatch(self, s2):
        aware = StateTimeline.single(T0, T0 + 1000, GlobalState.ACC)
        base = StateTimeline.single(T0, T0 + 2000, GlobalState.GPS)
        with pytest.raises(SpanMismatchError):
            compare_savings(aware, base, s2)


def test_timeline_csv_round_trip(tmp_path, s2):
    timeline = StateTimeline.from_durations(T0, [(GlobalState.GPS, 0.5), (GlobalState.ACC, 2.0),
                                                 (GlobalState.GPS, 0.25)])
    path = tmp_path / 'timeline.csv'
    timeline_to_csv(timeline, path)
    df = pd.read_csv(path)
    assert list(df.columns) == ['t_seconds', 'state']
    assert df['state'].tolist() == ['GPS', 'ACC', 'GPS', 'OFF']
    assert timeline_from_csv(path).intervals == timeline.intervals

    curve_path = tmp_path / 'curve.csv'
    curve_to_csv(simulate_battery(timeline, s2, step_s=600), curve_path)
    curve = pd.read_csv(curve_path)
    assert list(curve.columns) == ['t_seconds', 'level_pct']
    assert curve['level_pct'].iloc[0] == 100.0
