import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple, Union

from .errors import InvalidInputError
from .geo import Journey

logger = logging.getLogger(__name__)

Interval = Tuple[int, int]


class Detection(str, Enum):
    FULL = 'full'
    CLIPPED = 'clipped'
    MISSED = 'missed'


@dataclass
class DetectionReport:
    outcomes: List[Tuple[Interval, Detection]] = field(default_factory=list)
    tolerance_s: float = 60.0

    def count(self, kind: Detection) -> int:
        return sum(1 for _, d in self.outcomes if d == kind)

    def fraction(self, kind: Detection) -> float:
        return self.count(kind) / len(self.outcomes) if self.outcomes else 0.0

    @property
    def total(self) -> int:
        return len(self.outcomes)

    @property
    def fractions(self) -> Tuple[float, float, float]:
        return tuple(self.fraction(k) for k in (Detection.FULL, Detection.CLIPPED, Detection.MISSED))

    def to_dict(self) -> dict:
        return {
            'total': self.total,
            'tolerance_s': self.tolerance_s,
            'full': self.count(Detection.FULL),
            'clipped': self.count(Detection.CLIPPED),
            'missed': self.count(Detection.MISSED),
            'full_fraction': self.fraction(Detection.FULL),
            'clipped_fraction': self.fraction(Detection.CLIPPED),
            'missed_fraction': self.fraction(Detection.MISSED),
            'entries': [{'start_t': s, 'end_t': e, 'result': d.value} for (s, e), d in self.outcomes],
        }


def _interval(j: Union[Journey, Interval]) -> Interval:
    if isinstance(j, Journey):
        return j.start_t, j.end_t
    return int(j[0]), int(j[1])


def check_diary(diary: Sequence[Interval]) -> List[Interval]:
    entries = sorted(_interval(d) for d in diary)
    for start, end in entries:
        if end < start:
            raise InvalidInputError(f"diary entry {start}-{end} ends before it starts")
    for (s0, e0), (s1, e1) in zip(entries, entries[1:]):
        if s1 < e0:
            raise InvalidInputError(f"diary entries {s0}-{e0} and {s1}-{e1} overlap")
    return entries


def classify_entry(entry: Interval, detected: Sequence[Interval], tol_ms: int) -> Detection:
    start, end = entry
    if any(s <= start + tol_ms and e >= end - tol_ms for s, e in detected):
        return Detection.FULL
    if any(s < end and e > start for s, e in detected):
        return Detection.CLIPPED
    return Detection.MISSED


def validate_detection(detected: Sequence[Union[Journey, Interval]], diary: Sequence[Interval],
                       tolerance_s: float = 60.0) -> DetectionReport:
    """
    Score detected journeys against a truth diary.

    An entry is fully detected when one journey covers it up to `tolerance_s`
    at both ends, clipped when journeys only overlap it, missed otherwise.
    """
    entries = check_diary(diary)
    intervals = [_interval(j) for j in detected]
    tol_ms = int(tolerance_s * 1000)
    report = DetectionReport([(e, classify_entry(e, intervals, tol_ms)) for e in entries], tolerance_s)
    full, clipped, missed = report.fractions
    logger.info(
        f"Detection over {report.total} journeys: {full:.0%} full, {clipped:.0%} clipped, {missed:.0%} missed"
    )
    return report


def validate_against_baseline(aware: Sequence[Union[Journey, Interval]], base: Sequence[Union[Journey, Interval]],
                              tolerance_s: float = 60.0) -> DetectionReport:
    """Score battery-aware journeys using the always-on GPS journeys as truth."""
    return validate_detection(aware, [_interval(j) for j in base], tolerance_s)


def diary_from_pings(pings: Sequence[Tuple[int, str]]) -> List[Interval]:
    """Pair each 'start' ping with the following 'stop' ping."""
    diary = []
    start = None
    for t, label in sorted(pings):
        label = label.strip().lower()
        if label == 'start':
            if start is not None:
                logger.warning(f"Unmatched start ping at {start}")
            start = t
        elif label == 'stop':
            if start is None:
                logger.warning(f"Stop ping at {t} without a start")
                continue
            diary.append((start, t))
            start = None
    return diary
