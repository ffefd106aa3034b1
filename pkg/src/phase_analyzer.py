"""
Turns simulated trajectories into observables: hitting times, phase
segments, the final state reached, invasions and cycle statistics.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.signal import find_peaks

from .ecology import PAIRS, TYPES, FitnessSummary, Infeasible
from .exceptions import Degenerate
from .gillespie import Terminal, Trajectory
from .lotka_volterra import LVSystem, ODESolution

logger = logging.getLogger(__name__)

UNDETERMINED = 'Undetermined'


@dataclass(frozen=True)
class AnalysisConfig:
    """
    eps is the phase threshold; final_window defaults to 3 log K and
    prominence to max(floor(eps^2 K), 5) individuals.
    """
    eps: float = 0.1
    final_window: Optional[float] = None
    prominence: Optional[float] = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f'eps must be positive, got {self.eps}')
        if self.final_window is not None and not self.final_window > 0:
            raise ValueError(f'final_window must be positive, got {self.final_window}')
        if self.prominence is not None and not self.prominence >= 1:
            raise ValueError(f'prominence must be at least 1, got {self.prominence}')

    def window(self, K: int) -> float:
        if self.final_window is not None:
            return float(self.final_window)
        return 3.0 * math.log(K)

    def peak_prominence(self, K: int) -> float:
        if self.prominence is not None:
            return float(self.prominence)
        return float(max(math.floor(self.eps * self.eps * K), 5))

    def threshold(self, K: int) -> int:
        """floor(eps K), the count separating small from large populations"""
        return max(int(math.floor(self.eps * K)), 1)


class PhaseKind(Enum):
    STOCHASTIC = 'Stochastic'
    DETERMINISTIC = 'Deterministic'


@dataclass
class PhaseSegment:
    kind: PhaseKind
    types: Tuple[int, ...]
    start: float
    end: float

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'types': list(self.types), 'start': self.start, 'end': self.end}


@dataclass(frozen=True)
class FinalState:
    """A candidate equilibrium, or Undetermined when point is None"""
    label: str
    point: Optional[Tuple[float, float, float]] = None
    support: Tuple[int, ...] = ()

    @property
    def determined(self) -> bool:
        return self.point is not None

    def to_dict(self) -> Dict[str, Any]:
        return {'label': self.label, 'point': None if self.point is None else list(self.point),
                'support': list(self.support)}


def support_label(support: Tuple[int, ...]) -> str:
    """'origin', 'axis1', 'pair02', 'interior'"""
    if not support:
        return 'origin'
    if len(support) == 1:
        return f'axis{support[0]}'
    if len(support) == 2:
        return f'pair{support[0]}{support[1]}'
    return 'interior'


UNDETERMINED_STATE = FinalState(UNDETERMINED)


@dataclass
class PhaseReport:
    hitting_times: Dict[Tuple[int, int], Optional[float]]
    phases: List[PhaseSegment]
    final_state: FinalState
    sweep_duration: Optional[float]
    survivors: Tuple[int, ...]
    arrival_times: Dict[int, Optional[float]]
    invasion_times: Dict[int, Optional[float]]
    extinction_times: Dict[int, Optional[float]]
    terminal: str
    end_time: float

    CSV_FIELDS = ('terminal', 'end_time', 'final_state', 'sweep_duration', 'survivors',
                  'arrival2', 'invasion1', 'invasion2', 'extinction0', 'extinction1', 'extinction2')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'terminal': self.terminal,
            'end_time': self.end_time,
            'hitting_times': [{'type': i, 'level': level, 'time': t}
                              for (i, level), t in sorted(self.hitting_times.items())],
            'phases': [segment.to_dict() for segment in self.phases],
            'final_state': self.final_state.to_dict(),
            'sweep_duration': self.sweep_duration,
            'survivors': list(self.survivors),
            'arrival_times': {str(i): t for i, t in self.arrival_times.items()},
            'invasion_times': {str(i): t for i, t in self.invasion_times.items()},
            'extinction_times': {str(i): t for i, t in self.extinction_times.items()},
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def csv_row(self) -> Dict[str, Any]:
        def cell(value):
            return '' if value is None else value
        return {
            'terminal': self.terminal,
            'end_time': self.end_time,
            'final_state': self.final_state.label,
            'sweep_duration': cell(self.sweep_duration),
            'survivors': '|'.join(str(i) for i in self.survivors),
            'arrival2': cell(self.arrival_times.get(2)),
            'invasion1': cell(self.invasion_times.get(1)),
            'invasion2': cell(self.invasion_times.get(2)),
            'extinction0': cell(self.extinction_times.get(0)),
            'extinction1': cell(self.extinction_times.get(1)),
            'extinction2': cell(self.extinction_times.get(2)),
        }


@dataclass
class Cycle:
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class CycleReport:
    cycles: List[Cycle] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.cycles)

    @property
    def durations(self) -> List[float]:
        return [c.duration for c in self.cycles]

    def to_dict(self) -> Dict[str, Any]:
        return {'count': self.count,
                'cycles': [{'start': c.start, 'end': c.end, 'duration': c.duration} for c in self.cycles]}

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def hitting_time(traj: Trajectory, i: int, level: float) -> Optional[float]:
    """First time N_i = floor(level); None if never"""
    return traj.first_hit(i, int(math.floor(level)))


def arrival_time(traj: Trajectory, i: int) -> Optional[float]:
    """Time type i first becomes present; None if it never does"""
    if traj.counts[0][i] > 0:
        return 0.0
    if i == 2:
        return traj.injected2_at
    return None


def extinction_time(traj: Trajectory, i: int) -> Optional[float]:
    """First time N_i returns to 0 after arrival"""
    if arrival_time(traj, i) is None:
        return None
    return traj.first_hit(i, 0, since_arrival=True)


def reached(traj: Trajectory, i: int, level: int) -> bool:
    if arrival_time(traj, i) is None:
        return False
    return traj.first_hit(i, int(level), since_arrival=True) is not None


def invasion_time(traj: Trajectory, i: int, eps: float) -> Optional[float]:
    """Time from arrival to floor(eps K); None if the level is never hit"""
    arrival = arrival_time(traj, i)
    if arrival is None:
        return None
    level = max(int(math.floor(eps * traj.K)), 1)
    hit = traj.first_hit(i, level, since_arrival=True)
    return None if hit is None else hit - arrival


def survivors(traj: Trajectory, eps: float) -> Tuple[int, ...]:
    """Mutant types that reached floor(eps K)"""
    level = max(int(math.floor(eps * traj.K)), 1)
    return tuple(i for i in (1, 2) if reached(traj, i, level))


def detect_invasion(traj: Trajectory, i: int, floor: float, from_time: float) -> bool:
    """True iff N_i > floor K at every recorded time from from_time on"""
    if not floor > 0:
        raise ValueError(f'floor must be positive, got {floor}')
    if from_time > traj.end_time:
        return False
    start = max(int(np.searchsorted(traj.times, from_time, side='right')) - 1, 0)
    return bool(np.all(traj.counts[start:, i] > floor * traj.K))


def final_state_candidates(summary: FitnessSummary) -> List[FinalState]:
    """The origin, viable axis points, feasible pairs and a feasible interior point"""
    candidates = [FinalState('origin', (0.0, 0.0, 0.0), ())]
    for i in TYPES:
        if summary.nbar[i] > 0:
            point = [0.0, 0.0, 0.0]
            point[i] = summary.nbar[i]
            candidates.append(FinalState(support_label((i,)), tuple(point), (i,)))
    for i, j in PAIRS:
        pair = summary.nbar_pair[(i, j)]
        if isinstance(pair, Infeasible):
            continue
        point = [0.0, 0.0, 0.0]
        point[i], point[j] = pair
        candidates.append(FinalState(support_label((i, j)), tuple(point), (i, j)))
    try:
        interior = LVSystem.from_params(summary.params).equilibrium(TYPES)
    except Degenerate:
        interior = None
    if interior is not None:
        candidates.append(FinalState('interior', tuple(float(x) for x in interior), TYPES))
    return candidates


def _observed(traj: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
    mask = traj.stride_mask()
    return traj.times[mask], traj.counts[mask]


def detect_final_state(traj: Trajectory, cfg: AnalysisConfig, summary: FitnessSummary) -> FinalState:
    """
    Candidate equilibrium whose eps-ball (L1, densities) holds the trajectory
    over the trailing final window; Undetermined otherwise.

    A run stopped on mutant loss has no trailing window: the state at the
    stop must lie in the resident's ball.
    """
    final_counts = traj.counts[-1]
    if not np.any(final_counts):
        return FinalState('origin', (0.0, 0.0, 0.0), ())
    candidates = final_state_candidates(summary)
    if traj.terminal == Terminal.MUTANTS_LOST:
        for candidate in candidates:
            if candidate.support != (0,):
                continue
            distance = float(np.abs(final_counts / float(traj.K) - np.asarray(candidate.point)).sum())
            if distance <= cfg.eps:
                return candidate
        return UNDETERMINED_STATE
    if traj.terminal != Terminal.HORIZON_REACHED:
        return UNDETERMINED_STATE

    window = cfg.window(traj.K)
    if traj.end_time < window:
        return UNDETERMINED_STATE
    times, counts = _observed(traj)
    start = max(int(np.searchsorted(times, traj.end_time - window, side='right')) - 1, 0)
    trailing = counts[start:] / float(traj.K)

    best, best_spread = UNDETERMINED_STATE, math.inf
    for candidate in candidates:
        distances = np.abs(trailing - np.asarray(candidate.point)).sum(axis=1)
        spread = float(distances.max())
        if spread <= cfg.eps and spread < best_spread:
            best, best_spread = candidate, spread
    if best.determined:
        assert best_spread <= cfg.eps
    return best


def sweep_duration(traj: Trajectory, final_state: FinalState, eps: float) -> Optional[float]:
    """
    Earliest time after which every observed state lies in the final-state
    ball and every type outside its support is extinct.
    """
    if not final_state.determined:
        return None
    times, counts = _observed(traj)
    distances = np.abs(counts / float(traj.K) - np.asarray(final_state.point)).sum(axis=1)
    outside = np.flatnonzero(distances > eps)
    if outside.size == 0:
        entry = 0.0
    elif outside[-1] + 1 < len(times):
        entry = float(times[outside[-1] + 1])
    else:
        return None
    for i in TYPES:
        if i in final_state.support or arrival_time(traj, i) is None:
            continue
        gone = extinction_time(traj, i)
        if gone is None:
            return None
        entry = max(entry, gone)
    return entry


def segment_phases(traj: Trajectory, eps: float) -> List[PhaseSegment]:
    """
    Maximal intervals on which the split of living types into small
    (below floor(eps K)) and large is constant.
    """
    threshold = max(int(math.floor(eps * traj.K)), 1)
    segments: List[PhaseSegment] = []
    previous = None
    for t, row in zip(traj.times, traj.counts):
        small = tuple(i for i in TYPES if 0 < row[i] < threshold)
        large = tuple(i for i in TYPES if row[i] >= threshold)
        key = (small, large)
        if key == previous:
            continue
        if segments:
            segments[-1].end = float(t)
        if small:
            segments.append(PhaseSegment(PhaseKind.STOCHASTIC, small, float(t), float(t)))
        else:
            segments.append(PhaseSegment(PhaseKind.DETERMINISTIC, large, float(t), float(t)))
        previous = key
    if segments:
        segments[-1].end = traj.end_time
    return segments


def detect_cycles(traj: Trajectory, cfg: AnalysisConfig) -> CycleReport:
    """
    Intervals between consecutive prominent maxima of N_1 that contain a
    prominent maximum of both N_2 and N_0.
    """
    times, counts = _observed(traj)
    if len(times) < 3:
        return CycleReport()
    prominence = cfg.peak_prominence(traj.K)
    peaks = [find_peaks(counts[:, i], prominence=prominence)[0] for i in TYPES]
    first, second, wild = peaks[1], peaks[2], peaks[0]

    cycles = []
    for left, right in zip(first[:-1], first[1:]):
        has_second = np.any((second > left) & (second < right))
        has_wild = np.any((wild > left) & (wild < right))
        if has_second and has_wild:
            cycles.append(Cycle(float(times[left]), float(times[right])))
    logger.debug(f'{len(first)} maxima of N1, {len(cycles)} complete cycles')
    return CycleReport(cycles)


def sup_distance_to_ode(traj: Trajectory, solution: ODESolution, until: float) -> float:
    """max over observed t <= until of the L1 distance between N/K and the ODE solution"""
    times, counts = _observed(traj)
    keep = times <= until
    if not np.any(keep):
        return 0.0
    ode = solution.full_states()
    reference = np.column_stack([np.interp(times[keep], solution.times, ode[:, i]) for i in TYPES])
    return float(np.abs(counts[keep] / float(traj.K) - reference).sum(axis=1).max())


def analyze(traj: Trajectory, cfg: AnalysisConfig, summary: FitnessSummary) -> PhaseReport:
    """Full PhaseReport of one trajectory"""
    positive = [n for n in summary.nbar if n > 0]
    if positive and cfg.eps >= min(positive) / 4:
        logger.warning(f'eps={cfg.eps} is not below a quarter of the smallest resident density')

    hitting = {}
    for i in TYPES:
        for level in traj.levels:
            if arrival_time(traj, i) is None:
                hitting[(i, int(level))] = None
            else:
                hitting[(i, int(level))] = traj.first_hit(i, int(level), since_arrival=True)

    final_state = detect_final_state(traj, cfg, summary)
    return PhaseReport(
        hitting_times=hitting,
        phases=segment_phases(traj, cfg.eps),
        final_state=final_state,
        sweep_duration=sweep_duration(traj, final_state, cfg.eps),
        survivors=survivors(traj, cfg.eps),
        arrival_times={i: arrival_time(traj, i) for i in TYPES},
        invasion_times={i: invasion_time(traj, i, cfg.eps) for i in (1, 2)},
        extinction_times={i: extinction_time(traj, i) for i in TYPES},
        terminal=traj.terminal.value,
        end_time=traj.end_time,
    )
