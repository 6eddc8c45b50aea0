import logging
from typing import Iterable, List, Optional, Sequence

from .config import PostprocParams
from .errors import OrderingError
from .geo import Journey, haversine, speed


class PostProcessor:
    """
    Offline pass over spooled segments.

    One pass runs, in order: the low distance threshold, backwards segment
    concatenation, the high distance threshold, end trimming and the high
    threshold again. Passes repeat until the journeys stop changing, so the
    pipeline is idempotent on its own output. The cut limit of end trimming
    applies per pass.
    """

    def __init__(self, params: Optional[PostprocParams] = None):
        self.params = params or PostprocParams()
        self.params.validate()
        self.logger = logging.getLogger(__name__)

    def filter_low(self, segments: Sequence[Journey]) -> List[Journey]:
        kept = [j for j in segments if j.extent >= self.params.low_len]
        self._log_drop('low threshold', segments, kept)
        return kept

    def filter_high(self, segments: Sequence[Journey]) -> List[Journey]:
        kept = [j for j in segments if j.extent >= self.params.high_len]
        self._log_drop('high threshold', segments, kept)
        return kept

    def terminal_speed(self, journey: Journey) -> float:
        """Mean speed over the last `join_avg_count` point pairs of a journey."""
        points = journey.points
        if len(points) < 2:
            return 0.0
        count = min(self.params.join_avg_count, len(points) - 1)
        speeds = [speed(points[-m - 1], points[-m]) for m in range(1, count + 1)]
        return sum(speeds) / len(speeds)

    def can_join(self, first: Journey, second: Journey) -> bool:
        gap_s = (second.start_t - first.end_t) / 1000.0
        if gap_s >= self.params.join_gap:
            return False
        gap_speed = haversine(first.points[-1].position, second.points[0].position) / gap_s
        return gap_speed <= self.params.join_tolerance * self.terminal_speed(first)

    def concatenate(self, segments: Sequence[Journey]) -> List[Journey]:
        """
        Join neighbouring segments, walking pairs from the next-to-last backwards.

        A merged journey keeps its successor's tail, so one backwards pass
        reaches the same result as restarting after every join.
        """
        journeys = list(segments)
        for i in range(1, len(journeys)):
            if journeys[i].start_t <= journeys[i - 1].end_t:
                raise OrderingError(
                    f"segment {i} starts at {journeys[i].start_t} before segment {i - 1} "
                    f"ends at {journeys[i - 1].end_t}"
                )
        for i in range(len(journeys) - 2, -1, -1):
            if self.can_join(journeys[i], journeys[i + 1]):
                self.logger.debug(f"Joining segments starting at {journeys[i].start_t} and {journeys[i + 1].start_t}")
                merged = Journey.from_points(journeys[i].points + journeys[i + 1].points)
                journeys[i:i + 2] = [merged]
        return journeys

    def trim_ends(self, journey: Journey) -> Journey:
        points = list(journey.points)
        cuts = 0
        while cuts < self.params.tail_max_cuts and len(points) > 2 \
                and speed(points[0], points[1]) > self.params.tail_speed:
            points.pop(0)
            cuts += 1
        cuts = 0
        while cuts < self.params.tail_max_cuts and len(points) > 2 \
                and speed(points[-2], points[-1]) > self.params.tail_speed:
            points.pop()
            cuts += 1
        if len(points) == len(journey.points):
            return journey
        self.logger.debug(f"Trimmed {len(journey.points) - len(points)} points from journey at {journey.start_t}")
        return Journey.from_points(points)

    def run_pass(self, journeys: Sequence[Journey]) -> List[Journey]:
        journeys = self.filter_low(journeys)
        journeys = self.concatenate(journeys)
        journeys = self.filter_high(journeys)
        journeys = [self.trim_ends(j) if len(j) >= 2 else j for j in journeys]
        # a trimmed journey must still clear the high threshold
        return self.filter_high(journeys)

    def run_pipeline(self, segments: Iterable[Journey]) -> List[Journey]:
        ordered = sorted(segments, key=lambda j: j.start_t)
        journeys = self.run_pass(ordered)
        passes = 1
        # trimming can expose another fast tail or a new join; repeat until stable
        while True:
            again = self.run_pass(journeys)
            if again == journeys:
                break
            journeys = again
            passes += 1
        self.logger.info(f"Post-processing kept {len(journeys)} of {len(ordered)} segments after {passes} passes")
        return journeys

    def _log_drop(self, stage: str, before: Sequence[Journey], after: Sequence[Journey]) -> None:
        dropped = len(before) - len(after)
        if dropped:
            self.logger.debug(f"{stage}: dropped {dropped} of {len(before)} journeys")


def postprocess(segments: Iterable[Journey], params: Optional[PostprocParams] = None) -> List[Journey]:
    return PostProcessor(params).run_pipeline(segments)
