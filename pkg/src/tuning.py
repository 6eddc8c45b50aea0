"""
Motion detector tuning.

Scores MotionParams against labeled accelerometer runs and searches the
parameter box by simulated annealing, random search or a coarse grid.
"""
import itertools
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .config import MOTION_PARAM_BOX, MotionParams
from .errors import InvalidInputError
from .motion_fsm import FilteredAccel, MotionFsm, block_mean, extra_floor, extra_windows_pass

logger = logging.getLogger(__name__)

PARAM_NAMES = tuple(MOTION_PARAM_BOX)


@dataclass
class LabeledAccelRun:
    samples: Sequence[FilteredAccel]
    motion: bool
    onset_t: Optional[int] = None
    name: str = ''
    values: List[float] = field(init=False, repr=False)
    onset_index: int = field(init=False, repr=False)
    _tables: Dict[tuple, np.ndarray] = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if not self.samples:
            raise InvalidInputError(f"run '{self.name}' has no samples")
        if self.motion and self.onset_t is None:
            raise InvalidInputError(f"motion run '{self.name}' needs an onset timestamp")
        self.values = [s.mag_dev for s in self.samples]
        onset = self.onset_t if self.motion else None
        self.onset_index = sum(1 for s in self.samples if onset is not None and s.t < onset)

    def __len__(self) -> int:
        return len(self.samples)

    def block_means(self, n1: int) -> np.ndarray:
        """Mean of the n1 values starting at every offset."""
        key = ('check', n1)
        if key not in self._tables:
            v = self.values
            self._tables[key] = np.array([block_mean(v[i:i + n1]) for i in range(len(v) - n1 + 1)])
        return self._tables[key]

    def extra_floors(self, n2: int, w2: int) -> np.ndarray:
        """Smallest EXTRA window mean for a stage starting at every offset."""
        key = ('extra', n2, w2)
        if key not in self._tables:
            v = self.values
            self._tables[key] = np.array([extra_floor(v[i:i + n2], w2) for i in range(len(v) - n2 + 1)])
        return self._tables[key]


@dataclass(frozen=True)
class ClassificationOutcome:
    fnr: float
    fpr: float
    n_n: float  # mean samples to a true-negative decision
    n_p: float  # mean samples from onset to a true-positive decision
    tp: int = 0
    fn: int = 0
    tn: int = 0
    fp: int = 0

    @classmethod
    def from_rates(cls, fnr: float, fpr: float, n_n: float = 0.0, n_p: float = 0.0) -> 'ClassificationOutcome':
        return cls(fnr=fnr, fpr=fpr, n_n=n_n, n_p=n_p)

    @property
    def tp_rate(self) -> float:
        return 1.0 - self.fnr

    @property
    def tn_rate(self) -> float:
        return 1.0 - self.fpr

    def confusion_matrix(self) -> Dict[str, Dict[str, float]]:
        """Rows are the actual class, normalized to 1."""
        return {
            'motion': {'motion': self.tp_rate, 'no_motion': self.fnr},
            'no_motion': {'motion': self.fpr, 'no_motion': self.tn_rate},
        }

    def to_dict(self) -> dict:
        data = asdict(self)
        data['confusion_matrix'] = self.confusion_matrix()
        return data


@dataclass(frozen=True)
class CostWeights:
    fnr: float = 12.0
    fpr: float = 4.0
    n_n: float = 0.02
    n_p: float = 0.04


def cost(outcome: ClassificationOutcome, weights: CostWeights = CostWeights()) -> float:
    return (weights.fnr * outcome.fnr + weights.fpr * outcome.fpr
            + weights.n_n * outcome.n_n + weights.n_p * outcome.n_p)


def replay_events(values: Sequence[float], params: MotionParams) -> Iterator[Tuple[str, int]]:
    """
    Block replay of the motion FSM over one run.

    Yields ('reject', count) after each failed EXTRA stage and ('decide', count)
    on each confirmation, where count is the number of samples consumed so far.
    Stepping MotionFsm sample by sample produces the same events.
    """
    n1, th1, n2, th2, w2 = params.as_tuple()
    i, n = 0, len(values)
    while i + n1 <= n:
        block = values[i:i + n1]
        i += n1
        if block_mean(block) < th1:
            continue
        if i + n2 > n:
            return
        extra = values[i:i + n2]
        i += n2
        if extra_windows_pass(extra, w2, th2):
            yield 'decide', i
        else:
            yield 'reject', i


def table_events(run: LabeledAccelRun, params: MotionParams) -> Iterator[Tuple[str, int]]:
    """`replay_events` over the run's cached block tables, skipping failed CHECK blocks in one step."""
    n1, th1, n2, th2, w2 = params.as_tuple()
    means = run.block_means(n1)
    floors = run.extra_floors(n2, w2)
    i, n = 0, len(run)
    while i + n1 <= n:
        hits = np.flatnonzero(means[i::n1] >= th1)
        if not hits.size:
            return
        i += (int(hits[0]) + 1) * n1
        if i + n2 > n:
            return
        passed = floors[i] >= th2
        i += n2
        yield ('decide' if passed else 'reject'), i


def fsm_events(run: LabeledAccelRun, params: MotionParams) -> Iterator[Tuple[str, int]]:
    """Same events as `replay_events`, produced by stepping a MotionFsm."""
    fsm = MotionFsm(params)
    for sample in run.samples:
        rejections = fsm.rejections
        decision = fsm.on_filtered(sample)
        if decision is not None:
            yield 'decide', decision.samples_seen
        elif fsm.rejections != rejections:
            yield 'reject', fsm.samples_seen


def classify_run(run: LabeledAccelRun, params: MotionParams, fast: bool = True) -> Tuple[bool, Optional[int]]:
    """
    Return (decided, delay) for one run.

    For a motion run `decided` means a decision at or after the onset and
    `delay` counts samples from the onset to it. For a no-motion run `decided`
    means any decision; `delay` counts samples to the first rejection, or the
    whole run when none occurs.
    """
    events = table_events(run, params) if fast else fsm_events(run, params)
    if run.motion:
        for kind, count in events:
            if kind == 'decide' and count > run.onset_index:
                return True, count - run.onset_index
        return False, None
    first_rejection = None
    for kind, count in events:
        if kind == 'decide':
            return True, None
        if first_rejection is None:
            first_rejection = count
    return False, first_rejection if first_rejection is not None else len(run)


def score_params(params: MotionParams, runs: Sequence[LabeledAccelRun], fast: bool = True) -> ClassificationOutcome:
    if not runs:
        raise InvalidInputError("score_params needs at least one labeled run")
    tp = fn = tn = fp = 0
    p_delays: List[int] = []
    n_delays: List[int] = []
    for run in runs:
        decided, delay = classify_run(run, params, fast=fast)
        if run.motion:
            if decided:
                tp += 1
                p_delays.append(delay)
            else:
                fn += 1
        elif decided:
            fp += 1
        else:
            tn += 1
            n_delays.append(delay)
    positives, negatives = tp + fn, tn + fp
    return ClassificationOutcome(
        fnr=fn / positives if positives else 0.0,
        fpr=fp / negatives if negatives else 0.0,
        n_n=float(np.mean(n_delays)) if n_delays else 0.0,
        n_p=float(np.mean(p_delays)) if p_delays else 0.0,
        tp=tp, fn=fn, tn=tn, fp=fp,
    )


@dataclass(frozen=True)
class AnnealingConfig:
    epochs: int = 10000
    initial_temperature: float = 1.0
    cooling: float = 0.995  # geometric factor per epoch
    proposal_width: float = 0.1  # fraction of each parameter range
    seed: Optional[int] = None
    mode: str = 'anneal'  # or 'random'

    def validate(self) -> 'AnnealingConfig':
        if self.epochs <= 0:
            raise InvalidInputError("epochs must be strictly positive")
        if self.initial_temperature < 0:
            raise InvalidInputError("initial_temperature must not be negative")
        if not 0 < self.cooling <= 1:
            raise InvalidInputError("cooling must be in (0, 1]")
        if not 0 < self.proposal_width <= 1:
            raise InvalidInputError("proposal_width must be in (0, 1]")
        if self.mode not in ('anneal', 'random'):
            raise InvalidInputError(f"unknown search mode '{self.mode}'")
        return self


@dataclass
class TuningResult:
    params: MotionParams
    outcome: ClassificationOutcome
    cost: float
    evaluations: int
    history: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'params': asdict(self.params),
            'cost': self.cost,
            'evaluations': self.evaluations,
            'outcome': self.outcome.to_dict(),
        }


class _Objective:
    def __init__(self, runs: Sequence[LabeledAccelRun], weights: CostWeights):
        self.runs = runs
        self.weights = weights
        self._cache: Dict[tuple, Tuple[float, ClassificationOutcome]] = {}

    def __call__(self, params: MotionParams) -> Tuple[float, ClassificationOutcome]:
        key = params.as_tuple()
        if key not in self._cache:
            outcome = score_params(params, self.runs)
            self._cache[key] = (cost(outcome, self.weights), outcome)
        return self._cache[key]

    @property
    def evaluations(self) -> int:
        return len(self._cache)


def _to_params(vector: Sequence[float]) -> MotionParams:
    values = {}
    for name, x in zip(PARAM_NAMES, vector):
        low, high, integer = MOTION_PARAM_BOX[name]
        x = min(max(x, low), high)
        values[name] = int(round(x)) if integer else float(x)
    return MotionParams(**values)


def _uniform_point(rng: np.random.Generator) -> MotionParams:
    return _to_params([rng.uniform(low, high) for low, high, _ in MOTION_PARAM_BOX.values()])


def _propose(params: MotionParams, width: float, rng: np.random.Generator) -> MotionParams:
    vector = []
    for name, x in zip(PARAM_NAMES, params.as_tuple()):
        low, high, integer = MOTION_PARAM_BOX[name]
        span = width * (high - low)
        if integer:
            span = max(span, 2.0)
        vector.append(x + rng.uniform(-0.5, 0.5) * span)
    return _to_params(vector)


def _check_labels(runs: Sequence[LabeledAccelRun]) -> None:
    if not runs:
        raise InvalidInputError("tuning needs at least one labeled run")
    labels = {r.motion for r in runs}
    if labels != {True, False}:
        logger.warning(f"Tuning corpus only holds {'motion' if True in labels else 'no-motion'} runs")


def anneal(runs: Sequence[LabeledAccelRun], config: Optional[AnnealingConfig] = None,
           weights: CostWeights = CostWeights()) -> TuningResult:
    """
    Simulated annealing over the motion parameter box with Metropolis acceptance.

    A zero initial temperature accepts only strict improvements.
    """
    config = (config or AnnealingConfig()).validate()
    if config.mode == 'random':
        return random_search(runs, config, weights)
    _check_labels(runs)
    rng = np.random.default_rng(config.seed)
    objective = _Objective(runs, weights)

    current = _uniform_point(rng)
    current_cost, current_outcome = objective(current)
    best, best_cost, best_outcome = current, current_cost, current_outcome
    temperature = config.initial_temperature
    history = [current_cost]
    for epoch in range(config.epochs):
        candidate = _propose(current, config.proposal_width, rng)
        candidate_cost, candidate_outcome = objective(candidate)
        delta = candidate_cost - current_cost
        if delta < 0 or (temperature > 0 and rng.random() < math.exp(-delta / temperature)):
            current, current_cost, current_outcome = candidate, candidate_cost, candidate_outcome
            if current_cost < best_cost:
                best, best_cost, best_outcome = current, current_cost, current_outcome
        history.append(current_cost)
        temperature *= config.cooling
        if epoch % 1000 == 0:
            logger.debug(f"Epoch {epoch}: T={temperature:.4g} cost={current_cost:.4f} best={best_cost:.4f}")

    logger.info(f"Annealing finished: best cost {best_cost:.4f} after {objective.evaluations} evaluations")
    return TuningResult(best, best_outcome, best_cost, objective.evaluations, history)


def random_search(runs: Sequence[LabeledAccelRun], config: Optional[AnnealingConfig] = None,
                  weights: CostWeights = CostWeights()) -> TuningResult:
    config = (config or AnnealingConfig(mode='random')).validate()
    _check_labels(runs)
    rng = np.random.default_rng(config.seed)
    objective = _Objective(runs, weights)
    best = None
    history = []
    for _ in range(config.epochs):
        params = _uniform_point(rng)
        c, outcome = objective(params)
        if best is None or c < best[1]:
            best = (params, c, outcome)
        history.append(best[1])
    logger.info(f"Random search finished: best cost {best[1]:.4f} after {objective.evaluations} evaluations")
    return TuningResult(best[0], best[2], best[1], objective.evaluations, history)


def default_grid(points_per_axis: int = 5) -> Dict[str, List[float]]:
    grid = {}
    for name, (low, high, integer) in MOTION_PARAM_BOX.items():
        axis = np.linspace(low, high, points_per_axis)
        grid[name] = sorted({int(round(x)) for x in axis}) if integer else [float(x) for x in axis]
    return grid


@dataclass
class GridResult:
    best: TuningResult
    costs: List[Tuple[MotionParams, float]]

    def quantile(self, q: float) -> float:
        return float(np.quantile([c for _, c in self.costs], q))


def grid_search(runs: Sequence[LabeledAccelRun], grid: Optional[Dict[str, Sequence[float]]] = None,
                weights: CostWeights = CostWeights()) -> GridResult:
    """Exhaustive enumeration of a quantized parameter box."""
    _check_labels(runs)
    grid = grid or default_grid()
    objective = _Objective(runs, weights)
    costs = []
    best = None
    for combo in itertools.product(*(grid[name] for name in PARAM_NAMES)):
        params = MotionParams(**dict(zip(PARAM_NAMES, combo)))
        c, outcome = objective(params)
        costs.append((params, c))
        if best is None or c < best[1]:
            best = (params, c, outcome)
    logger.info(f"Grid search over {len(costs)} points: best cost {best[1]:.4f}")
    return GridResult(TuningResult(best[0], best[2], best[1], objective.evaluations), costs)
