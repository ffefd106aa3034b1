"""
Exact stochastic simulation of the three-type birth-death process.

The inner loop is a numba-compiled direct-method SSA with six reaction
channels (birth and death of each type) plus the scheduled arrival of the
second mutant at alpha*log(K).
"""
import csv
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .config import Config
from .ecology import EcologyParams, monomorphic_equilibrium
from .exceptions import InsufficientRecording, NonviableResident, RejectionBudgetExceeded

logger = logging.getLogger(__name__)

EVENT_NAMES = ('b0', 'd0', 'b1', 'd1', 'b2', 'd2', 'inj2', 'sample')
EV_INJECT = 6
EV_SAMPLE = 7

# Full recomputation of the competition load every this many events
LOAD_REFRESH = 4096


class Terminal(Enum):
    ALL_EXTINCT = 'AllExtinct'
    HORIZON_REACHED = 'HorizonReached'
    EVENT_BUDGET = 'EventBudget'
    CONDITION_FAILED = 'ConditionFailed'
    MUTANTS_LOST = 'MutantsLost'
    COUNT_CEILING = 'CountCeiling'


_TERMINAL_CODES = (
    Terminal.ALL_EXTINCT,
    Terminal.HORIZON_REACHED,
    Terminal.EVENT_BUDGET,
    Terminal.CONDITION_FAILED,
    Terminal.MUTANTS_LOST,
    Terminal.COUNT_CEILING,
)


class Condition(Enum):
    MUTANT1_SURVIVES = 'Mutant1Survives'
    MUTANT2_SURVIVES = 'Mutant2Survives'
    BOTH_SURVIVE = 'BothSurvive'

    @property
    def watched(self) -> Tuple[int, ...]:
        return {'Mutant1Survives': (1,), 'Mutant2Survives': (2,), 'BothSurvive': (1, 2)}[self.value]


@dataclass(frozen=True)
class PopulationState:
    counts: Tuple[int, int, int]
    time: float

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError(f'Counts must be nonnegative: {self.counts}')
        if not math.isfinite(self.time) or self.time < 0:
            raise ValueError(f'Time must be finite and nonnegative: {self.time}')


@dataclass(frozen=True)
class RecordPolicy:
    """
    What the simulator writes out.

    every_event records each transition; stride adds samples of the
    pre-event state at multiples of stride; levels are counts whose first
    hit per type is tabulated.
    """
    every_event: bool = False
    stride: Optional[float] = 0.1
    levels: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.stride is not None and not self.stride > 0:
            raise ValueError(f'stride must be positive, got {self.stride}')
        object.__setattr__(self, 'levels', tuple(sorted({int(x) for x in self.levels})))

    @classmethod
    def every(cls) -> 'RecordPolicy':
        return cls(every_event=True, stride=None)

    @classmethod
    def strided(cls, dt: float) -> 'RecordPolicy':
        return cls(stride=dt)

    @classmethod
    def thresholds(cls, levels: Iterable[int], stride: Optional[float] = None) -> 'RecordPolicy':
        return cls(stride=stride, levels=tuple(levels))

    @classmethod
    def default_for(cls, params: EcologyParams, eps: float, stride: float = 0.1) -> 'RecordPolicy':
        """Levels 1, eps^2 K, eps K and the resident sizes, plus stride samples"""
        K = params.K
        levels = {1, int(eps * eps * K), int(eps * K)}
        for i in range(3):
            nbar = monomorphic_equilibrium(params, i)
            if nbar > 0:
                levels.add(int(nbar * K))
        return cls(stride=stride, levels=tuple(x for x in levels if x > 0))


@dataclass(frozen=True)
class SimConfig:
    seed: int = Config.BASE_SEED
    horizon: Optional[float] = None
    max_events: int = 10 ** 9
    record: RecordPolicy = field(default_factory=RecordPolicy)
    mutation2_enabled: bool = True
    mutation1_enabled: bool = True
    stop_on_mutant_loss: bool = False
    count_ceiling: Optional[int] = None
    initial: Optional[Tuple[int, int, int]] = None
    attempts: Optional[int] = None

    def __post_init__(self):
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError(f'horizon must be positive, got {self.horizon}')
        if not self.max_events > 0:
            raise ValueError(f'max_events must be positive, got {self.max_events}')
        if self.count_ceiling is not None and self.count_ceiling < 1:
            raise ValueError(f'count_ceiling must be at least 1, got {self.count_ceiling}')

    def resolved_horizon(self, K: int) -> float:
        """Explicit horizon, or 50 log K (50 when K == 1)"""
        if self.horizon is not None:
            return float(self.horizon)
        return 50.0 * math.log(K) if K > 1 else 50.0


@dataclass
class Trajectory:
    times: np.ndarray
    counts: np.ndarray
    events: np.ndarray
    terminal: Terminal
    injected2_at: Optional[float]
    K: int
    record: RecordPolicy
    levels: np.ndarray
    first_hits: np.ndarray
    n_events: int
    seed: int
    rejections: int = 0

    @property
    def samples(self) -> List[PopulationState]:
        return [PopulationState(tuple(int(c) for c in row), float(t))
                for t, row in zip(self.times, self.counts)]

    @property
    def initial(self) -> PopulationState:
        return PopulationState(tuple(int(c) for c in self.counts[0]), 0.0)

    @property
    def final(self) -> PopulationState:
        return PopulationState(tuple(int(c) for c in self.counts[-1]), float(self.times[-1]))

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def densities(self) -> np.ndarray:
        return self.counts / float(self.K)

    def stride_mask(self) -> np.ndarray:
        """Rows usable as an evenly observed series"""
        if self.record.every_event:
            return np.ones(len(self.times), dtype=bool)
        return self.events == EV_SAMPLE

    def first_hit(self, i: int, level: int, since_arrival: bool = False) -> Optional[float]:
        """
        First time N_i equals level, None if never.

        With since_arrival the search for type 2 starts at its injection, so
        level 0 gives its extinction time.

        Raises:
            InsufficientRecording: If the level was neither tabulated nor
                resolvable from a full event record
        """
        level = int(level)
        late = since_arrival and i == 2 and int(self.counts[0][2]) == 0
        if late and self.injected2_at is None:
            return None
        if not late and level == int(self.counts[0][i]):
            return 0.0
        hits = np.flatnonzero(self.levels == level)
        if hits.size:
            # the type-2 column is restarted at injection
            value = self.first_hits[i, hits[0]]
            return None if np.isnan(value) else float(value)
        if self.record.every_event:
            start = 0
            if late:
                start = int(np.flatnonzero(self.events == EV_INJECT)[0])
            match = np.flatnonzero(self.counts[start:, i] == level)
            return float(self.times[start + match[0]]) if match.size else None
        raise InsufficientRecording(f'Level {level} of type {i} was not recorded')

    def rows(self) -> Iterable[Tuple[float, int, int, int, str]]:
        for t, row, ev in zip(self.times, self.counts, self.events):
            yield float(t), int(row[0]), int(row[1]), int(row[2]), EVENT_NAMES[int(ev)]

    def write_csv(self, handle: IO[str]) -> None:
        writer = csv.writer(handle)
        writer.writerow(['t', 'n0', 'n1', 'n2', 'event'])
        for t, n0, n1, n2, ev in self.rows():
            writer.writerow([repr(t), n0, n1, n2, ev])

    def summary(self) -> dict:
        return {
            'terminal': self.terminal.value,
            'end_time': self.end_time,
            'final_counts': list(self.final.counts),
            'injected2_at': self.injected2_at,
            'n_events': self.n_events,
            'n_records': int(len(self.times)),
            'seed': self.seed,
            'rejections': self.rejections,
        }


def derive_seed(base_seed: int, *keys: int) -> int:
    """Independent 64-bit seed for the stream identified by keys"""
    seq = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, np.uint64)[0])


def initial_state(params: EcologyParams) -> PopulationState:
    """
    (floor(nbar_0 K), 1, 0) at time 0.

    Raises:
        NonviableResident: If nbar_0 <= 0
    """
    nbar0 = monomorphic_equilibrium(params, 0)
    if not nbar0 > 0:
        raise NonviableResident(f'Resident equilibrium density is {nbar0:.6g}')
    return PopulationState((int(math.floor(nbar0 * params.K)), 1, 0), 0.0)


@njit(cache=True)
def _append(times, counts, events, k, t, n, ev):
    if k == times.shape[0]:
        cap = 2 * times.shape[0]
        new_times = np.empty(cap, np.float64)
        new_counts = np.empty((cap, 3), np.int64)
        new_events = np.empty(cap, np.int8)
        new_times[:k] = times[:k]
        new_counts[:k] = counts[:k]
        new_events[:k] = events[:k]
        times, counts, events = new_times, new_counts, new_events
    times[k] = t
    counts[k, 0] = n[0]
    counts[k, 1] = n[1]
    counts[k, 2] = n[2]
    events[k] = ev
    return times, counts, events, k + 1


@njit(cache=True)
def _mark_hits(first_hits, levels, i, count, t):
    crossed = False
    for l in range(levels.shape[0]):
        if levels[l] == count and np.isnan(first_hits[i, l]):
            first_hits[i, l] = t
            crossed = True
    return crossed


@njit(cache=True)
def _ssa_kernel(rg, n0, beta, delta, comp_k, t_inject, horizon, max_events,
                every_event, stride, levels, watch, watch_level, stop_on_mutant_loss,
                count_ceiling):
    n = n0.copy()
    t = 0.0
    cap = 1024
    times = np.empty(cap, np.float64)
    counts = np.empty((cap, 3), np.int64)
    events = np.empty(cap, np.int8)
    k = 0
    times, counts, events, k = _append(times, counts, events, k, 0.0, n, 7)

    first_hits = np.full((3, levels.shape[0]), np.nan)
    for i in range(3):
        _mark_hits(first_hits, levels, i, n[i], 0.0)
    reached = np.zeros(3, np.bool_)
    for i in range(3):
        if watch[i] and n[i] >= watch_level:
            reached[i] = True

    load = np.zeros(3)
    for a in range(3):
        for b in range(3):
            load[a] += comp_k[a, b] * n[b]

    pending = t_inject >= 0.0
    inj_time = np.nan
    sample_idx = 1
    next_sample = stride if stride > 0.0 else np.inf
    rates = np.zeros(6)
    n_events = 0
    terminal = 1

    while True:
        total = 0.0
        for i in range(3):
            rates[2 * i] = beta[i] * n[i]
            rates[2 * i + 1] = (delta[i] + load[i]) * n[i]
            total += rates[2 * i] + rates[2 * i + 1]
        if total <= 0.0:
            terminal = 0
            break

        u = rg.random()
        t_next = t - np.log(1.0 - u) / total
        injecting = pending and t_inject < t_next
        t_stop = t_inject if injecting else t_next

        while next_sample <= t_stop and next_sample <= horizon:
            times, counts, events, k = _append(times, counts, events, k, next_sample, n, 7)
            sample_idx += 1
            next_sample = sample_idx * stride

        if t_stop > horizon:
            t = horizon
            terminal = 1
            break

        if injecting:
            # the drawn event is discarded; waiting times are memoryless
            t = t_inject
            n[2] += 1
            for a in range(3):
                load[a] += comp_k[a, 2]
            pending = False
            inj_time = t
            for l in range(levels.shape[0]):
                first_hits[2, l] = np.nan
            _mark_hits(first_hits, levels, 2, n[2], t)
            if watch[2] and n[2] >= watch_level:
                reached[2] = True
            times, counts, events, k = _append(times, counts, events, k, t, n, 6)
            continue

        target = rg.random() * total
        channel = 0
        acc = rates[0]
        while (acc <= target or rates[channel] == 0.0) and channel < 5:
            channel += 1
            acc += rates[channel]
        while rates[channel] == 0.0 and channel > 0:
            channel -= 1

        t = t_next
        i = channel // 2
        step = 1 if channel % 2 == 0 else -1
        n[i] += step
        for a in range(3):
            load[a] += step * comp_k[a, i]
        n_events += 1
        if n_events % LOAD_REFRESH == 0:
            for a in range(3):
                load[a] = 0.0
                for b in range(3):
                    load[a] += comp_k[a, b] * n[b]

        crossed = _mark_hits(first_hits, levels, i, n[i], t)
        if every_event or crossed:
            times, counts, events, k = _append(times, counts, events, k, t, n, channel)

        if watch[i]:
            if n[i] >= watch_level:
                reached[i] = True
            elif n[i] == 0 and not reached[i]:
                terminal = 3
                break
        if count_ceiling > 0 and n[i] >= count_ceiling:
            terminal = 5
            break
        if stop_on_mutant_loss and n[1] == 0 and n[2] == 0 and not pending:
            terminal = 4
            break
        if n_events >= max_events:
            terminal = 2
            break

    times, counts, events, k = _append(times, counts, events, k, t, n, 7)
    return times[:k], counts[:k], events[:k], terminal, inj_time, first_hits, n_events


def starting_counts(params: EcologyParams, config: SimConfig) -> np.ndarray:
    if config.initial is not None:
        counts = PopulationState(tuple(int(c) for c in config.initial), 0.0).counts
    else:
        counts = initial_state(params).counts
        if not config.mutation1_enabled:
            counts = (counts[0], 0, counts[2])
    return np.array(counts, dtype=np.int64)


def simulate(params: EcologyParams, config: SimConfig,
             watch: Sequence[int] = (), watch_level: int = 0) -> Trajectory:
    """
    One exact trajectory of the birth-death process.

    Args:
        params: Model parameters; competition is applied as comp/K
        config: Run settings; the same config always gives the same trajectory
        watch: Mutant types whose extinction before watch_level ends the run
            with ConditionFailed
        watch_level: Count a watched type must reach to be safe

    Returns:
        Trajectory; horizon and budget outcomes are recorded in terminal
    """
    K = params.K
    n0 = starting_counts(params, config)
    horizon = config.resolved_horizon(K)
    t_inject = params.alpha * math.log(K) if config.mutation2_enabled else -1.0

    levels = set(config.record.levels)
    levels.add(0)
    if watch_level > 0:
        levels.add(int(watch_level))
    levels = np.array(sorted(levels), dtype=np.int64)
    watch_mask = np.zeros(3, dtype=np.bool_)
    for i in watch:
        watch_mask[i] = True

    rg = np.random.default_rng(config.seed)
    times, counts, events, code, inj_time, first_hits, n_events = _ssa_kernel(
        rg, n0,
        np.asarray(params.beta, dtype=np.float64),
        np.asarray(params.delta, dtype=np.float64),
        params.comp_matrix() / K,
        float(t_inject), float(horizon), np.int64(config.max_events),
        bool(config.record.every_event),
        float(config.record.stride) if config.record.stride else 0.0,
        levels, watch_mask, np.int64(max(int(watch_level), 1)),
        bool(config.stop_on_mutant_loss),
        np.int64(config.count_ceiling or 0),
    )
    terminal = _TERMINAL_CODES[code]
    if terminal == Terminal.EVENT_BUDGET:
        logger.warning(f'Event budget of {config.max_events} exhausted at t={times[-1]:.4f}')
    return Trajectory(
        times=times, counts=counts, events=events, terminal=terminal,
        injected2_at=None if np.isnan(inj_time) else float(inj_time),
        K=K, record=config.record, levels=levels, first_hits=first_hits,
        n_events=int(n_events), seed=int(config.seed))


def condition_holds(traj: Trajectory, condition: Condition, level: int) -> bool:
    """Every watched mutant reached level"""
    if traj.terminal == Terminal.CONDITION_FAILED:
        return False
    for i in condition.watched:
        hit = traj.first_hit(i, level)
        if hit is None:
            return False
    return True


def simulate_conditioned(params: EcologyParams, config: SimConfig, condition: Condition,
                         eps: float = 0.1, seed_keys: Sequence[int] = ()) -> Trajectory:
    """
    Rejection-sample a trajectory on which the watched mutants reach floor(eps K).

    Attempt a runs with seed derive_seed(config.seed, *seed_keys, a).

    Returns:
        The accepted trajectory, with rejections set to the number of failed attempts

    Raises:
        RejectionBudgetExceeded: After config.attempts (default Config.MAX_ATTEMPTS) failures
    """
    if not config.mutation1_enabled and 1 in condition.watched:
        raise ValueError('Cannot condition on mutant 1 when it is disabled')
    if not config.mutation2_enabled and 2 in condition.watched:
        raise ValueError('Cannot condition on mutant 2 when it is disabled')
    level = max(int(math.floor(eps * params.K)), 1)
    attempts = config.attempts or Config.MAX_ATTEMPTS

    for attempt in range(attempts):
        run_config = replace(config, seed=derive_seed(config.seed, *seed_keys, attempt))
        traj = simulate(params, run_config, watch=condition.watched, watch_level=level)
        if condition_holds(traj, condition, level):
            traj.rejections = attempt
            return traj
        logger.debug(f'Attempt {attempt} rejected ({traj.terminal.value} at t={traj.end_time:.3f})')
    logger.warning(f'{condition.value} not met in {attempts} attempts')
    raise RejectionBudgetExceeded(attempts)
