import asyncio
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import DefaultDict, List, Optional, Sequence, Tuple, Union

from .config import PipelineConfig
from .controller import Controller, StateTimeline
from .errors import InvalidInputError
from .geo import Journey
from .trace_io import TraceBundle, load_trace


@dataclass
class TraceResult:
    path: Path
    journeys: List[Journey] = field(default_factory=list)
    timeline: Optional[StateTimeline] = None
    diary: List[Tuple[int, int]] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def segment_bundle(bundle: TraceBundle, config: PipelineConfig,
                   session: Optional[Tuple[int, int]] = None) -> Tuple[List[Journey], StateTimeline]:
    """Run one trace through the controller."""
    session = session or bundle.span
    if session is None:
        raise InvalidInputError("trace holds no samples")
    if config.controller.battery_aware and not bundle.accel:
        logging.getLogger(__name__).warning("No accelerometer samples: replaying with the GPS always on")
        config = config.with_overrides({'controller': {'battery_aware': False}})
    result = Controller(config).run(bundle.gps, bundle.accel, bundle.status, session)
    return result.journeys, result.timeline


class BatchRunner:
    """
    Segments many traces concurrently, one independent pipeline per trace.

    Each trace runs in a worker thread; at most `max_concurrency` run at once.
    Failures are recorded per trace and counted by exception type.
    """

    def __init__(self, config: Optional[PipelineConfig] = None, max_concurrency: int = 4,
                 session: Optional[Tuple[int, int]] = None):
        if max_concurrency < 1:
            raise InvalidInputError("max_concurrency must be at least 1")
        self.config = config or PipelineConfig.default_config()
        self.session = session
        self.max_concurrency = max_concurrency
        self.semaphore: Optional[asyncio.Semaphore] = None
        self.logger = logging.getLogger(__name__)
        self.error_counts: DefaultDict[str, int] = defaultdict(int)

    def process(self, path: Union[str, Path]) -> TraceResult:
        path = Path(path)
        bundle = load_trace(path)
        journeys, timeline = segment_bundle(bundle, self.config, self.session)
        self.logger.info(f"{path}: {len(journeys)} journeys")
        return TraceResult(path=path, journeys=journeys, timeline=timeline, diary=bundle.diary)

    async def _run_one(self, path: Path) -> TraceResult:
        async with self.semaphore:
            try:
                return await asyncio.to_thread(self.process, path)
            except (InvalidInputError, OSError) as e:
                error_type = type(e).__name__
                self.error_counts[error_type] += 1
                self.logger.error(f"Failed to segment {path}: {error_type}: {str(e)}")
                return TraceResult(path=path, error=f"{error_type}: {str(e)}")
            except Exception as e:
                error_type = type(e).__name__
                self.error_counts[error_type] += 1
                self.logger.error(f"Unexpected error on {path}: {error_type}: {str(e)}", exc_info=True)
                return TraceResult(path=path, error=f"{error_type}: {str(e)}")

    async def run(self, paths: Sequence[Union[str, Path]]) -> List[TraceResult]:
        """Segment every trace; results keep the order of `paths`."""
        if isinstance(paths, (str, Path)):
            paths = [paths]
        self.semaphore = asyncio.Semaphore(self.max_concurrency)
        tasks = [self._run_one(Path(p)) for p in paths]
        results = await asyncio.gather(*tasks)

        if self.error_counts:
            self.logger.info("Error statistics:")
            for error_type, count in self.error_counts.items():
                self.logger.info(f"  {error_type}: {count}")
        return list(results)
