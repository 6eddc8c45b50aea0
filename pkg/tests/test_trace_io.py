import json

import pandas as pd
import pytest

from src.errors import OrderingError, TraceParseError, ValidationError
from src.synthetic import generate_accel_corpus, generate_synthetic, preset_scenario
from src.trace_io import (GPS_FILE, LABELS_FILE, META_FILE, load_accel_corpus, load_battery_samples,
                          load_gps_csv, load_journeys, load_trace, save_accel_corpus, save_journeys,
                          save_trace)

from .conftest import T0, north_journey


def write(path, text):
    path.write_text(text, encoding='utf-8')
    return path


@pytest.fixture(scope='module')
def walk_bundle():
    bundle, _ = generate_synthetic(preset_scenario('indoor-end'), seed=2)
    return bundle


class TestTraceDirectory:
    def test_round_trip(self, walk_bundle, tmp_path):
        save_trace(walk_bundle, tmp_path / 'trace')
        loaded = load_trace(tmp_path / 'trace')
        assert loaded.gps == walk_bundle.gps
        assert loaded.accel == walk_bundle.accel
        assert loaded.status == walk_bundle.status
        assert loaded.pings == walk_bundle.pings
        assert loaded.diary == walk_bundle.diary
        assert loaded.metadata == walk_bundle.metadata
        assert loaded.span == walk_bundle.span

    def test_meta_is_sorted_json(self, walk_bundle, tmp_path):
        save_trace(walk_bundle, tmp_path)
        text = (tmp_path / META_FILE).read_text(encoding='utf-8')
        assert list(json.loads(text)) == sorted(walk_bundle.metadata)

    def test_single_csv_is_a_gps_trace(self, tmp_path):
        path = write(tmp_path / 'fixes.csv', f"t_ms,lat,lon,sats\n{T0},35.9,14.5,9\n{T0 + 1000},35.9001,14.5,\n")
        bundle = load_trace(path)
        assert len(bundle.gps) == 2
        assert bundle.gps[0].sats == 9
        assert bundle.gps[1].sats is None
        assert bundle.accel == [] and bundle.status == []

    def test_missing_paths(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_trace(tmp_path / 'nope')
        (tmp_path / 'empty').mkdir()
        with pytest.raises(FileNotFoundError):
            load_trace(tmp_path / 'empty')

    def test_unordered_fixes(self, tmp_path):
        write(tmp_path / GPS_FILE, f"t_ms,lat,lon\n{T0 + 1000},35.9,14.5\n{T0},35.9,14.5\n")
        with pytest.raises(OrderingError):
            load_trace(tmp_path)


class TestParseErrors:
    def test_bad_number_reports_line_and_column(self, tmp_path):
        path = write(tmp_path / 'gps.csv', f"t_ms,lat,lon\n{T0},35.9,14.5\n{T0 + 1000},abc,14.5\n")
        with pytest.raises(TraceParseError) as excinfo:
            load_gps_csv(path)
        assert excinfo.value.line == 3
        assert excinfo.value.field == 'lat'

    def test_fractional_timestamp(self, tmp_path):
        path = write(tmp_path / 'gps.csv', "t_ms,lat,lon\n1000.5,35.9,14.5\n")
        with pytest.raises(TraceParseError) as excinfo:
            load_gps_csv(path)
        assert excinfo.value.field == 't_ms'

    def test_missing_column(self, tmp_path):
        path = write(tmp_path / 'gps.csv', f"t_ms,lat\n{T0},35.9\n")
        with pytest.raises(TraceParseError) as excinfo:
            load_gps_csv(path)
        assert excinfo.value.line == 1
        assert excinfo.value.field == 'lon'

    def test_empty_file(self, tmp_path):
        with pytest.raises(TraceParseError):
            load_gps_csv(write(tmp_path / 'gps.csv', ''))

    def test_out_of_range_latitude(self, tmp_path):
        path = write(tmp_path / 'gps.csv', f"t_ms,lat,lon\n{T0},35.9,14.5\n{T0 + 1000},95.0,14.5\n")
        with pytest.raises(ValidationError) as excinfo:
            load_gps_csv(path)
        assert excinfo.value.field == 'lat'
        assert 'gps.csv:3' in str(excinfo.value)

    def test_whitespace_is_tolerated(self, tmp_path):
        path = write(tmp_path / 'gps.csv', f"t_ms, lat, lon\n{T0}, 35.9, 14.5\n")
        assert load_gps_csv(path)[0].lat == 35.9


def test_journeys_round_trip(tmp_path):
    journeys = [north_journey(T0, 10, 10.0), north_journey(T0 + 60_000, 5, 20.0)]
    path = tmp_path / 'out' / 'journeys.json'
    save_journeys(journeys, path)
    data = json.loads(path.read_text(encoding='utf-8'))
    assert set(data[0]) == {'start_t', 'end_t', 'path_length_m', 'bounds', 'points'}
    assert data[0]['path_length_m'] == pytest.approx(90.0)
    assert load_journeys(path) == journeys


def test_battery_samples(tmp_path):
    good = write(tmp_path / 'battery.csv', f"t_ms,level_pct\n{T0},100\n{T0 + 60_000},99.5\n")
    assert load_battery_samples(good) == [(T0, 100.0), (T0 + 60_000, 99.5)]
    bad = write(tmp_path / 'bad.csv', f"t_ms,level_pct\n{T0},100\n{T0 + 60_000},120\n")
    with pytest.raises(ValidationError):
        load_battery_samples(bad)


class TestAccelCorpus:
    def test_round_trip(self, tmp_path):
        recordings = generate_accel_corpus(4, seed=1, samples_per_run=30)
        save_accel_corpus(recordings, tmp_path)
        runs = load_accel_corpus(tmp_path)
        assert [r.name for r in runs] == [rec.name for rec in recordings]
        assert [r.motion for r in runs] == [rec.motion for rec in recordings]
        assert [r.onset_t for r in runs] == [rec.onset_t for rec in recordings]
        assert [r.values for r in runs] == [rec.labeled().values for rec in recordings]
        labels = pd.read_csv(tmp_path / LABELS_FILE)
        assert labels['label'].tolist() == ['motion', 'motion', 'no_motion', 'no_motion']

    def test_unknown_label(self, tmp_path):
        recordings = generate_accel_corpus(2, seed=1, samples_per_run=10)
        save_accel_corpus(recordings, tmp_path)
        labels = pd.read_csv(tmp_path / LABELS_FILE)
        labels.loc[1, 'label'] = 'maybe'
        labels.to_csv(tmp_path / LABELS_FILE, index=False)
        with pytest.raises(TraceParseError) as excinfo:
            load_accel_corpus(tmp_path)
        assert excinfo.value.line == 3

    def test_missing_labels(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_accel_corpus(tmp_path)
