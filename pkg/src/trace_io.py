"""
Trace files.

A trace directory holds `gps.csv` (t_ms,lat,lon,sats), `accel.csv`
(t_ms,ax,ay,az), `status.csv` (t_ms,sats), `pings.csv` (t_ms,label),
`meta.json` and, for synthetic traces, the truth diary `diary.csv`
(start_ms,end_ms). A bare CSV path is read as a GPS-only trace.
"""
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from .errors import TraceParseError, ValidationError
from .geo import GeoBounds, Journey, LocationSample, check_strictly_increasing
from .motion_fsm import AccelSample, filter_accel
from .tuning import LabeledAccelRun

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

GPS_FILE = 'gps.csv'
ACCEL_FILE = 'accel.csv'
STATUS_FILE = 'status.csv'
PINGS_FILE = 'pings.csv'
META_FILE = 'meta.json'
DIARY_FILE = 'diary.csv'
LABELS_FILE = 'labels.csv'


@dataclass
class TraceBundle:
    gps: List[LocationSample] = field(default_factory=list)
    accel: List[AccelSample] = field(default_factory=list)
    status: List[Tuple[int, int]] = field(default_factory=list)
    pings: List[Tuple[int, str]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    diary: List[Tuple[int, int]] = field(default_factory=list)

    def validate(self, source: str = 'trace') -> 'TraceBundle':
        check_strictly_increasing([s.t for s in self.gps], f"{source} GPS fixes")
        check_strictly_increasing([a.t for a in self.accel], f"{source} accelerometer samples")
        check_strictly_increasing([t for t, _ in self.status], f"{source} satellite readings")
        check_strictly_increasing([t for t, _ in self.pings], f"{source} pings")
        return self

    @property
    def span(self) -> Optional[Tuple[int, int]]:
        times = [t for t in (
            self.gps[0].t if self.gps else None, self.gps[-1].t if self.gps else None,
            self.accel[0].t if self.accel else None, self.accel[-1].t if self.accel else None,
            self.status[0][0] if self.status else None, self.status[-1][0] if self.status else None,
        ) if t is not None]
        return (min(times), max(times)) if times else None


def _parse_number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return float('nan')


def _read_table(path: Path, columns: Sequence[str], optional: Sequence[str] = (),
                integer: Sequence[str] = ('t_ms',), text: Sequence[str] = ()) -> Dict[str, list]:
    """
    Read a CSV into per-column lists, checking every numeric cell.

    Optional columns may be absent or blank (read as None). Line numbers in
    errors count the header as line 1.
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise TraceParseError(str(path), 1, None, "file is empty")
    except pd.errors.ParserError as e:
        match = re.search(r'line (\d+)', str(e))
        raise TraceParseError(str(path), int(match.group(1)) if match else 0, None, str(e))

    df.columns = [c.strip() for c in df.columns]
    for name in columns:
        if name not in df.columns:
            raise TraceParseError(str(path), 1, name, "missing column")

    table: Dict[str, list] = {}
    for name in list(columns) + [c for c in optional if c in df.columns]:
        raw = df[name].str.strip()
        if name in text:
            table[name] = raw.tolist()
            continue
        values = raw.map(_parse_number).astype(float)
        blank = raw == ''
        bad = values.isna() & ~blank if name in optional else values.isna()
        if name in integer:
            bad |= values.notna() & (values != values.round())
        if bad.any():
            row = int(bad.to_numpy().argmax())
            raise TraceParseError(str(path), row + 2, name, f"cannot parse '{raw.iloc[row]}'")
        if name in integer:
            table[name] = [None if pd.isna(v) else int(v) for v in values]
        else:
            table[name] = [None if pd.isna(v) else float(v) for v in values]
    for name in optional:
        table.setdefault(name, [None] * len(df))
    return table


def _rows(path: Path, make, *columns: list) -> list:
    items = []
    for index, values in enumerate(zip(*columns)):
        try:
            items.append(make(*values))
        except ValidationError as e:
            raise ValidationError(e.field, f"{path}:{index + 2}: {e}")
    return items


def load_gps_csv(path: PathLike) -> List[LocationSample]:
    path = Path(path)
    table = _read_table(path, ['t_ms', 'lat', 'lon'], optional=['sats'], integer=('t_ms', 'sats'))
    return _rows(path, LocationSample, table['t_ms'], table['lat'], table['lon'], table['sats'])


def load_accel_csv(path: PathLike) -> List[AccelSample]:
    path = Path(path)
    table = _read_table(path, ['t_ms', 'ax', 'ay', 'az'])
    return _rows(path, AccelSample, table['t_ms'], table['ax'], table['ay'], table['az'])


def load_status_csv(path: PathLike) -> List[Tuple[int, int]]:
    table = _read_table(Path(path), ['t_ms', 'sats'], integer=('t_ms', 'sats'))
    return list(zip(table['t_ms'], table['sats']))


def load_pings_csv(path: PathLike) -> List[Tuple[int, str]]:
    table = _read_table(Path(path), ['t_ms', 'label'], text=('label',))
    return list(zip(table['t_ms'], table['label']))


def load_diary_csv(path: PathLike) -> List[Tuple[int, int]]:
    table = _read_table(Path(path), ['start_ms', 'end_ms'], integer=('start_ms', 'end_ms'))
    return list(zip(table['start_ms'], table['end_ms']))


def load_trace(path: PathLike) -> TraceBundle:
    """Load a trace directory, or a single GPS CSV file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trace not found: {path}")
    if path.is_file():
        bundle = TraceBundle(gps=load_gps_csv(path))
    else:
        if not (path / GPS_FILE).exists():
            raise FileNotFoundError(f"Trace directory {path} has no {GPS_FILE}")
        bundle = TraceBundle(gps=load_gps_csv(path / GPS_FILE))
        if (path / ACCEL_FILE).exists():
            bundle.accel = load_accel_csv(path / ACCEL_FILE)
        if (path / STATUS_FILE).exists():
            bundle.status = load_status_csv(path / STATUS_FILE)
        if (path / PINGS_FILE).exists():
            bundle.pings = load_pings_csv(path / PINGS_FILE)
        if (path / DIARY_FILE).exists():
            bundle.diary = load_diary_csv(path / DIARY_FILE)
        if (path / META_FILE).exists():
            with open(path / META_FILE, 'r', encoding='utf-8') as f:
                bundle.metadata = json.load(f)
    logger.debug(f"Loaded {path}: {len(bundle.gps)} fixes, {len(bundle.accel)} accel samples")
    return bundle.validate(str(path))


def save_trace(bundle: TraceBundle, directory: PathLike) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({
        't_ms': [s.t for s in bundle.gps],
        'lat': pd.array([s.lat for s in bundle.gps], dtype='float64'),
        'lon': pd.array([s.lon for s in bundle.gps], dtype='float64'),
        'sats': pd.array([s.sats for s in bundle.gps], dtype='Int64'),
    }).to_csv(directory / GPS_FILE, index=False)
    if bundle.accel:
        pd.DataFrame([(a.t, a.ax, a.ay, a.az) for a in bundle.accel],
                     columns=['t_ms', 'ax', 'ay', 'az']).to_csv(directory / ACCEL_FILE, index=False)
    if bundle.status:
        pd.DataFrame(bundle.status, columns=['t_ms', 'sats']).to_csv(directory / STATUS_FILE, index=False)
    if bundle.pings:
        pd.DataFrame(bundle.pings, columns=['t_ms', 'label']).to_csv(directory / PINGS_FILE, index=False)
    if bundle.diary:
        save_diary(bundle.diary, directory / DIARY_FILE)
    with open(directory / META_FILE, 'w', encoding='utf-8') as f:
        json.dump(bundle.metadata, f, indent=2, sort_keys=True)
    return directory


def save_diary(diary: Sequence[Tuple[int, int]], path: PathLike) -> None:
    pd.DataFrame(list(diary), columns=['start_ms', 'end_ms']).to_csv(path, index=False)


def bounds_to_dict(b: GeoBounds) -> dict:
    return {'bl': list(b.bl), 'tr': list(b.tr)}


def journey_to_dict(j: Journey) -> dict:
    return {
        'start_t': j.start_t,
        'end_t': j.end_t,
        'path_length_m': j.path_length,
        'bounds': bounds_to_dict(j.bounds),
        'points': [[p.t, p.lat, p.lon] for p in j.points],
    }


def save_journeys(journeys: Sequence[Journey], path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump([journey_to_dict(j) for j in journeys], f, indent=2)


def load_journeys(path: PathLike) -> List[Journey]:
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    journeys = []
    for index, item in enumerate(data):
        try:
            points = [LocationSample(t=int(t), lat=float(lat), lon=float(lon)) for t, lat, lon in item['points']]
        except (KeyError, TypeError, ValueError) as e:
            raise TraceParseError(str(path), index, 'points', f"journey {index}: {str(e)}")
        journeys.append(Journey.from_points(points))
    return journeys


def load_battery_samples(path: PathLike) -> List[Tuple[int, float]]:
    table = _read_table(Path(path), ['t_ms', 'level_pct'], optional=['voltage_mv'])
    for index, level in enumerate(table['level_pct']):
        if not 0 <= level <= 100:
            raise ValidationError('level_pct', f"{path}:{index + 2}: {level} outside [0, 100]")
    samples = list(zip(table['t_ms'], table['level_pct']))
    check_strictly_increasing([t for t, _ in samples], f"{path} battery samples")
    return samples


@dataclass
class AccelRecording:
    """Raw accelerometer run with its label, as stored in a tuning corpus."""

    name: str
    samples: List[AccelSample]
    motion: bool
    onset_t: Optional[int] = None

    def labeled(self) -> LabeledAccelRun:
        return LabeledAccelRun([filter_accel(s) for s in self.samples], self.motion, self.onset_t, self.name)


def save_accel_corpus(recordings: Sequence[AccelRecording], directory: PathLike) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for rec in recordings:
        pd.DataFrame([(a.t, a.ax, a.ay, a.az) for a in rec.samples],
                     columns=['t_ms', 'ax', 'ay', 'az']).to_csv(directory / f"{rec.name}.csv", index=False)
    pd.DataFrame({
        'file': [f"{rec.name}.csv" for rec in recordings],
        'label': ['motion' if rec.motion else 'no_motion' for rec in recordings],
        'onset_t_ms': pd.array([rec.onset_t for rec in recordings], dtype='Int64'),
    }).to_csv(directory / LABELS_FILE, index=False)
    return directory


def load_accel_corpus(directory: PathLike) -> List[LabeledAccelRun]:
    directory = Path(directory)
    labels_path = directory / LABELS_FILE
    if not labels_path.exists():
        raise FileNotFoundError(f"Accelerometer corpus {directory} has no {LABELS_FILE}")
    table = _read_table(labels_path, ['file', 'label'], optional=['onset_t_ms'],
                        integer=('onset_t_ms',), text=('file', 'label'))
    runs = []
    for index, (name, label, onset) in enumerate(zip(table['file'], table['label'], table['onset_t_ms'])):
        if label not in ('motion', 'no_motion'):
            raise TraceParseError(str(labels_path), index + 2, 'label', f"unknown label '{label}'")
        samples = load_accel_csv(directory / name)
        check_strictly_increasing([a.t for a in samples], str(directory / name))
        runs.append(AccelRecording(Path(name).stem, samples, label == 'motion', onset).labeled())
    logger.info(f"Loaded {len(runs)} labeled accelerometer runs from {directory}")
    return runs


