"""
Monte-Carlo experiments: replicate driver, estimators and verdicts.

An experiment simulates a fixed number of replicates of one parameter set,
turns each trajectory into a PhaseReport plus per-target observations, and
compares the aggregated estimates with the analytic predictions.
"""
import json
import logging
import math
import time
import zlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats
from tqdm import tqdm

from .birth_death import BDParams, extinction_cdf, hitting_prob, survival_prob
from .config import Config
from .ecology import EcologyParams, FitnessSummary, summarize
from .exceptions import ClonalError, InvalidSpecFile, RejectionBudgetExceeded
from .gillespie import (Condition, RecordPolicy, SimConfig, Terminal, Trajectory, derive_seed,
                        simulate, simulate_conditioned, starting_counts)
from .lotka_volterra import LVSystem, ODESolution, integrate
from .phase_analyzer import (UNDETERMINED, AnalysisConfig, PhaseReport, analyze, detect_cycles,
                             extinction_time, sup_distance_to_ode)
from .scenario_predictor import (BISTABLE, CYCLING_STATES, Prediction, cycle_ratio,
                                 invasion_time_prediction, predict, rps_cycle_prediction)

logger = logging.getLogger(__name__)

# Stream key of bootstrap resampling, outside the range of replicate indices
BOOTSTRAP_STREAM = 2 ** 32


@dataclass(frozen=True)
class TolerancePolicy:
    """
    frequency: absolute slack added on both sides of the confidence interval
    duration: relative slack on medians of durations
    ratio: absolute slack on ratios of durations
    """
    frequency: float = 0.05
    duration: float = 0.20
    ratio: float = 0.15
    confidence: float = 0.95

    def __post_init__(self):
        for name in ('frequency', 'duration', 'ratio'):
            if getattr(self, name) < 0:
                raise ValueError(f'Tolerance {name} must be nonnegative')
        if not 0 < self.confidence < 1:
            raise ValueError(f'confidence must lie in (0, 1), got {self.confidence}')


class EstimateKind(Enum):
    FREQUENCY = 'frequency'
    DURATION = 'duration'
    RATIO = 'ratio'
    MIN_FREQUENCY = 'min_frequency'


class Verdict(Enum):
    PASS = 'Pass'
    FAIL = 'Fail'
    NOT_APPLICABLE = 'NotApplicable'


@dataclass
class Estimate:
    name: str
    kind: EstimateKind
    value: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    n: int
    prediction: Optional[float] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'kind': self.kind.value,
            'value': self.value,
            'ci': [self.ci_low, self.ci_high],
            'n': self.n,
            'prediction': self.prediction,
            'details': self.details,
        }


@dataclass
class VerdictRow:
    target: str
    estimate: Optional[float]
    prediction: Optional[float]
    verdict: Verdict
    tolerance: str

    def to_dict(self) -> Dict[str, Any]:
        return {'target': self.target, 'estimate': self.estimate, 'prediction': self.prediction,
                'verdict': self.verdict.value, 'tolerance': self.tolerance}


def wilson_interval(successes: int, total: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion"""
    if total <= 0:
        return 0.0, 1.0
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    p = successes / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (p + z2 / (2.0 * total)) / denom
    margin = z * math.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total)) / denom
    return max(0.0, center - margin), min(1.0, center + margin)


def median_interval(values: Sequence[float], confidence: float, seed: int) -> Tuple[float, float, float]:
    """Median with a percentile-bootstrap interval; degenerate when the sample cannot vary"""
    data = np.asarray(values, dtype=np.float64)
    median = float(np.median(data))
    if data.size < 2 or np.ptp(data) == 0:
        return median, median, median
    result = stats.bootstrap((data,), np.median, confidence_level=confidence, n_resamples=999,
                             method='percentile', random_state=np.random.default_rng(seed))
    low, high = result.confidence_interval
    return median, float(low), float(high)


def judge(estimate: Estimate, policy: TolerancePolicy) -> VerdictRow:
    """Compare one estimate with its prediction"""
    value, pred = estimate.value, estimate.prediction
    kind = estimate.kind
    if value is None or pred is None:
        return VerdictRow(estimate.name, value, pred, Verdict.NOT_APPLICABLE, '-')
    if kind == EstimateKind.FREQUENCY:
        low = estimate.ci_low - policy.frequency
        high = estimate.ci_high + policy.frequency
        passed = low <= pred <= high
        tolerance = f'CI{policy.confidence:.0%} +/- {policy.frequency:g}'
    elif kind == EstimateKind.DURATION:
        passed = abs(value - pred) <= policy.duration * abs(pred)
        tolerance = f'+/- {policy.duration:.0%} relative'
    elif kind == EstimateKind.RATIO:
        passed = abs(value - pred) <= policy.ratio
        tolerance = f'+/- {policy.ratio:g}'
    else:
        passed = value >= pred
        tolerance = f'>= {pred:g}'
    return VerdictRow(estimate.name, value, pred, Verdict.PASS if passed else Verdict.FAIL, tolerance)


@dataclass
class ReplicateOutcome:
    index: int
    seed: int
    terminal: Optional[str]
    rejections: int
    exhausted: bool = False
    report: Optional[PhaseReport] = None
    cycles: List[float] = field(default_factory=list)
    observations: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ExperimentContext:
    """Everything a target needs besides the replicates"""
    params: EcologyParams
    summary: FitnessSummary
    sim: SimConfig
    analysis: AnalysisConfig
    condition: Optional[Condition]
    predictions: List[Prediction]
    confidence: float
    ode: Optional[ODESolution] = None
    prediction_error: str = ''

    @property
    def K(self) -> int:
        return self.params.K

    @property
    def eps(self) -> float:
        return self.analysis.eps

    @property
    def base_seed(self) -> int:
        return int(self.sim.seed)

    def consistent(self, branch: Prediction) -> bool:
        """The branch is compatible with the conditioning event"""
        if self.condition is None:
            return True
        return set(self.condition.watched) <= set(branch.reach)

    @property
    def condition_mass(self) -> Optional[float]:
        if not self.predictions:
            return None
        return sum(b.probability for b in self.predictions if self.consistent(b))

    def conditional(self, mass: float) -> Optional[float]:
        """Probability under the conditioning event, None if it has no predicted mass"""
        if self.condition is None:
            return mass
        total = self.condition_mass
        if not total:
            return None
        return min(mass / total, 1.0)

    def bootstrap_seed(self, name: str) -> int:
        return derive_seed(self.base_seed, BOOTSTRAP_STREAM, zlib.crc32(name.encode('utf-8')))


def state_matches(predicted: str, observed: str) -> bool:
    """Cycling predictions are met by an interior or undetermined end state"""
    if predicted in CYCLING_STATES:
        return observed in (UNDETERMINED, 'interior')
    return predicted == observed


def _frequency(name: str, hits: int, total: int, ctx: ExperimentContext,
               prediction: Optional[float], kind: EstimateKind = EstimateKind.FREQUENCY) -> Estimate:
    if total == 0:
        return Estimate(name, kind, None, None, None, 0, prediction)
    low, high = wilson_interval(hits, total, ctx.confidence)
    return Estimate(name, kind, hits / total, low, high, total, prediction, {'successes': hits})


def _median(name: str, values: Sequence[float], ctx: ExperimentContext, prediction: Optional[float],
            kind: EstimateKind = EstimateKind.DURATION, details: Optional[Dict[str, Any]] = None) -> Estimate:
    if not values:
        return Estimate(name, kind, None, None, None, 0, prediction)
    median, low, high = median_interval(values, ctx.confidence, ctx.bootstrap_seed(name))
    return Estimate(name, kind, median, low, high, len(values), prediction, details or {})


class Target:
    """A quantity estimated from the replicates"""
    name: ClassVar[str] = ''

    def levels(self, params: EcologyParams, sim: SimConfig) -> Tuple[int, ...]:
        """Extra counts whose first hits must be tabulated"""
        return ()

    @property
    def key(self) -> str:
        return self.name

    def observe(self, traj: Trajectory, report: PhaseReport, cycles: List[float],
                ctx: ExperimentContext) -> Any:
        return None

    def estimates(self, outcomes: List[ReplicateOutcome], ctx: ExperimentContext) -> List[Estimate]:
        raise NotImplementedError

    def to_dict(self) -> Dict[str, Any]:
        return {'target': self.name}

    @staticmethod
    def observed(outcomes: List[ReplicateOutcome], key: str) -> List[Any]:
        return [o.observations[key] for o in outcomes if not o.exhausted]


@dataclass
class InvasionProb(Target):
    """Frequency of mutant `type` reaching floor(eps K)"""
    type: int = 1
    name: ClassVar[str] = 'invasion_prob'

    @property
    def key(self) -> str:
        return f'{self.name}[{self.type}]'

    def observe(self, traj, report, cycles, ctx):
        return self.type in report.survivors

    def estimates(self, outcomes, ctx):
        values = self.observed(outcomes, self.key)
        prediction = None
        if ctx.predictions:
            mass = sum(b.probability for b in ctx.predictions
                       if self.type in b.reach and ctx.consistent(b))
            prediction = ctx.conditional(mass)
        return [_frequency(self.key, sum(values), len(values), ctx, prediction)]

    def to_dict(self):
        return {'target': self.name, 'type': self.type}


@dataclass
class InvasionTime(Target):
    """Median time from arrival to floor(eps K) of mutant `type`"""
    type: int = 1
    name: ClassVar[str] = 'invasion_time'

    @property
    def key(self) -> str:
        return f'{self.name}[{self.type}]'

    def observe(self, traj, report, cycles, ctx):
        return report.invasion_times.get(self.type)

    def estimates(self, outcomes, ctx):
        values = [v for v in self.observed(outcomes, self.key) if v is not None]
        try:
            prediction = invasion_time_prediction(ctx.summary, self.type, ctx.eps,
                                                  mutation1=ctx.sim.mutation1_enabled)
        except (ClonalError, ValueError) as e:
            logger.debug(f'No invasion time prediction: {e}')
            prediction = None
        return [_median(self.key, values, ctx, prediction)]

    def to_dict(self):
        return {'target': self.name, 'type': self.type}


def _branch_groups(ctx: ExperimentContext) -> List[Tuple[Tuple[int, ...], str, List[Prediction]]]:
    """Predicted branches merged by (mutants reaching eps K, final state)"""
    groups: Dict[Tuple[Tuple[int, ...], str], List[Prediction]] = {}
    for branch in ctx.predictions:
        if not ctx.consistent(branch):
            continue
        groups.setdefault((tuple(branch.reach), branch.final_state), []).append(branch)
    return [(reach, state, branches) for (reach, state), branches in groups.items()]


def _group_name(branches: List[Prediction]) -> str:
    return '+'.join(b.tag for b in branches)


@dataclass
class FinalStateFreq(Target):
    """Joint frequency of (mutants reaching eps K, final state) for every predicted branch"""
    name: ClassVar[str] = 'final_state_freq'

    def observe(self, traj, report, cycles, ctx):
        return tuple(report.survivors), report.final_state.label

    def estimates(self, outcomes, ctx):
        values = self.observed(outcomes, self.key)
        estimates = []
        for reach, state, branches in _branch_groups(ctx):
            name = f'{self.name}[{_group_name(branches)}]'
            if state == BISTABLE:
                hits = sum(1 for r, _ in values if r == reach)
                prediction = None
            else:
                hits = sum(1 for r, label in values if r == reach and state_matches(state, label))
                prediction = ctx.conditional(sum(b.probability for b in branches))
            estimate = _frequency(name, hits, len(values), ctx, prediction)
            estimate.details['final_state'] = state
            estimates.append(estimate)
        if not estimates:
            labels = sorted({label for _, label in values})
            for label in labels:
                hits = sum(1 for _, observed in values if observed == label)
                estimates.append(_frequency(f'{self.name}[{label}]', hits, len(values), ctx, None))
        return estimates


@dataclass
class SweepDurationQuantiles(Target):
    """Sweep duration quantiles per predicted branch with at least min_matches replicates"""
    quantiles: Tuple[float, ...] = (0.25, 0.5, 0.75)
    min_matches: int = 5
    name: ClassVar[str] = 'sweep_duration_quantiles'

    def observe(self, traj, report, cycles, ctx):
        return tuple(report.survivors), report.final_state.label, report.sweep_duration

    def estimates(self, outcomes, ctx):
        values = self.observed(outcomes, self.key)
        log_k = math.log(ctx.K)
        estimates = []
        for reach, state, branches in _branch_groups(ctx):
            durations = [d for r, label, d in values
                         if r == reach and d is not None and state_matches(state, label)]
            if len(durations) < self.min_matches:
                continue
            coeffs = {b.duration_coeff for b in branches}
            prediction = None
            if len(coeffs) == 1 and None not in coeffs:
                prediction = coeffs.pop() * log_k
            details = {f'q{int(round(q * 100)):02d}': float(np.quantile(durations, q))
                       for q in self.quantiles}
            name = f'{self.name}[{_group_name(branches)}]'
            estimates.append(_median(name, durations, ctx, prediction, details=details))
        return estimates

    def to_dict(self):
        return {'target': self.name, 'quantiles': list(self.quantiles), 'min_matches': self.min_matches}


@dataclass
class CycleCountFreq(Target):
    """Frequency of at least `cycles` complete cycles"""
    cycles: int = 1
    name: ClassVar[str] = 'cycle_count_freq'

    @property
    def key(self) -> str:
        return f'{self.name}[{self.cycles}]'

    def observe(self, traj, report, cycles, ctx):
        return len(cycles)

    def estimates(self, outcomes, ctx):
        values = self.observed(outcomes, self.key)
        prediction = None
        try:
            probability, _ = rps_cycle_prediction(ctx.summary, ctx.params.alpha, self.cycles, ctx.K)
            prediction = ctx.conditional(probability)
        except (ClonalError, ValueError) as e:
            logger.debug(f'No cycle prediction: {e}')
        hits = sum(1 for count in values if count >= self.cycles)
        return [_frequency(self.key, hits, len(values), ctx, prediction)]

    def to_dict(self):
        return {'target': self.name, 'cycles': self.cycles}


@dataclass
class CycleDurations(Target):
    """Median duration of cycle l and of the ratio of cycle l+1 to cycle l"""
    cycles: Tuple[int, ...] = (1, 2)
    name: ClassVar[str] = 'cycle_durations'

    def observe(self, traj, report, cycles, ctx):
        return list(cycles)

    def estimates(self, outcomes, ctx):
        values = self.observed(outcomes, self.key)
        try:
            ratio = cycle_ratio(ctx.summary)
        except (ClonalError, ValueError, KeyError, ZeroDivisionError):
            ratio = None
        estimates = []
        for l in self.cycles:
            try:
                _, predicted = rps_cycle_prediction(ctx.summary, ctx.params.alpha, l, ctx.K)
            except (ClonalError, ValueError) as e:
                logger.debug(f'No cycle duration prediction: {e}')
                predicted, ratio = None, None
            durations = [c[l - 1] for c in values if len(c) >= l]
            estimates.append(_median(f'cycle_duration[{l}]', durations, ctx, predicted))
            ratios = [c[l] / c[l - 1] for c in values if len(c) >= l + 1 and c[l - 1] > 0]
            estimates.append(_median(f'cycle_ratio[{l}]', ratios, ctx, ratio, kind=EstimateKind.RATIO))
        return estimates

    def to_dict(self):
        return {'target': self.name, 'cycles': list(self.cycles)}


@dataclass
class Acceptance(Target):
    """Acceptance rate of the conditioning against its predicted probability"""
    name: ClassVar[str] = 'acceptance'

    def estimates(self, outcomes, ctx):
        if ctx.condition is None:
            return [Estimate(self.key, EstimateKind.FREQUENCY, None, None, None, 0)]
        accepted = sum(1 for o in outcomes if not o.exhausted)
        attempts = sum(o.rejections + (0 if o.exhausted else 1) for o in outcomes)
        return [_frequency(self.key, accepted, attempts, ctx, ctx.condition_mass)]


@dataclass
class OdeDistance(Target):
    """Fraction of replicates whose scaled path stays within bound of the ODE solution"""
    bound: float = 0.05
    until: Optional[float] = None
    fraction: float = 0.95
    name: ClassVar[str] = 'ode_distance'

    def horizon(self, ctx: ExperimentContext) -> float:
        return float(self.until) if self.until is not None else ctx.sim.resolved_horizon(ctx.K)

    def observe(self, traj, report, cycles, ctx):
        return sup_distance_to_ode(traj, ctx.ode, self.horizon(ctx))

    def estimates(self, outcomes, ctx):
        values = self.observed(outcomes, self.key)
        hits = sum(1 for d in values if d <= self.bound)
        estimate = _frequency(self.key, hits, len(values), ctx, self.fraction, EstimateKind.MIN_FREQUENCY)
        if values:
            estimate.details['median_distance'] = float(np.median(values))
        return [estimate]

    def to_dict(self):
        return {'target': self.name, 'bound': self.bound, 'until': self.until, 'fraction': self.fraction}


def _resident_bd(ctx: ExperimentContext) -> BDParams:
    return BDParams(ctx.params.beta[0], ctx.params.delta[0])


@dataclass
class HittingProb(Target):
    """Frequency of the resident count reaching `upper` before `lower`"""
    lower: int = 0
    upper: int = 10
    name: ClassVar[str] = 'hitting_prob'

    @property
    def key(self) -> str:
        return f'{self.name}[{self.lower},{self.upper}]'

    def levels(self, params, sim):
        return (self.lower, self.upper)

    def observe(self, traj, report, cycles, ctx):
        up = traj.first_hit(0, self.upper)
        down = traj.first_hit(0, self.lower)
        return up is not None and (down is None or up < down)

    def estimates(self, outcomes, ctx):
        values = self.observed(outcomes, self.key)
        start = int(starting_counts(ctx.params, ctx.sim)[0])
        try:
            prediction = hitting_prob(_resident_bd(ctx), self.lower, start, self.upper)
        except ClonalError as e:
            logger.debug(f'No hitting probability: {e}')
            prediction = None
        return [_frequency(self.key, sum(values), len(values), ctx, prediction)]

    def to_dict(self):
        return {'target': self.name, 'lower': self.lower, 'upper': self.upper}


@dataclass
class ExtinctionCdf(Target):
    """Frequency of resident extinction by `time`"""
    time: float = 1.0
    name: ClassVar[str] = 'extinction_cdf'

    @property
    def key(self) -> str:
        return f'{self.name}[{self.time:g}]'

    def observe(self, traj, report, cycles, ctx):
        return extinction_time(traj, 0)

    def estimates(self, outcomes, ctx):
        values = self.observed(outcomes, self.key)
        hits = sum(1 for t in values if t is not None and t <= self.time)
        start = int(starting_counts(ctx.params, ctx.sim)[0])
        try:
            prediction = extinction_cdf(_resident_bd(ctx), start, self.time)
        except ClonalError as e:
            logger.debug(f'No extinction CDF: {e}')
            prediction = None
        return [_frequency(self.key, hits, len(values), ctx, prediction)]

    def to_dict(self):
        return {'target': self.name, 'time': self.time}


@dataclass
class SurvivalProb(Target):
    """
    Frequency of the resident never going extinct during the run.

    Pair with a count ceiling: a chain stopped at N has left extinction
    probability (d/b)^N behind, so the frequency estimates 1 - (d/b)^i.
    """
    name: ClassVar[str] = 'survival_prob'

    def observe(self, traj, report, cycles, ctx):
        return traj.final.counts[0] > 0

    def estimates(self, outcomes, ctx):
        values = self.observed(outcomes, self.key)
        start = int(starting_counts(ctx.params, ctx.sim)[0])
        try:
            prediction = survival_prob(_resident_bd(ctx), start)
        except ClonalError as e:
            logger.debug(f'No survival probability: {e}')
            prediction = None
        return [_frequency(self.key, sum(values), len(values), ctx, prediction)]


TARGET_TYPES = {cls.name: cls for cls in (
    InvasionProb, InvasionTime, FinalStateFreq, SweepDurationQuantiles, CycleCountFreq,
    CycleDurations, Acceptance, OdeDistance, HittingProb, ExtinctionCdf, SurvivalProb)}


def target_from_dict(entry: Dict[str, Any]) -> Target:
    """
    Build a target from {'target': name, **options}.

    Raises:
        InvalidSpecFile: On an unknown target or option
    """
    if not isinstance(entry, dict) or 'target' not in entry:
        raise InvalidSpecFile(f'Target entries need a "target" key, got {entry!r}')
    options = dict(entry)
    name = options.pop('target')
    cls = TARGET_TYPES.get(name)
    if cls is None:
        raise InvalidSpecFile(f'Unknown target {name!r}. Available: {", ".join(sorted(TARGET_TYPES))}')
    for key in ('quantiles', 'cycles'):
        if isinstance(options.get(key), list):
            options[key] = tuple(options[key])
    try:
        return cls(**options)
    except TypeError as e:
        raise InvalidSpecFile(f'Bad options for target {name}: {e}')


@dataclass
class ExperimentSpec:
    params: EcologyParams
    sim: SimConfig = field(default_factory=SimConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    replicates: int = 100
    conditioning: Optional[Condition] = None
    targets: List[Target] = field(default_factory=list)
    tolerance: TolerancePolicy = field(default_factory=TolerancePolicy)
    name: str = 'experiment'
    parallelism: int = Config.PARALLELISM

    def __post_init__(self):
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise InvalidSpecFile(f'replicates must be a positive integer, got {self.replicates!r}')
        if self.parallelism == 0:
            raise InvalidSpecFile('parallelism must be nonzero')

    def resolved_sim(self) -> SimConfig:
        """Sim config whose record policy tabulates every level the analysis and targets read"""
        levels = set(self.sim.record.levels)
        levels.update(RecordPolicy.default_for(self.params, self.analysis.eps).levels)
        for target in self.targets:
            levels.update(target.levels(self.params, self.sim))
        record = replace(self.sim.record, levels=tuple(sorted(levels)))
        return replace(self.sim, record=record)


@dataclass
class ExperimentReport:
    name: str
    estimates: List[Estimate]
    predictions: List[Prediction]
    verdicts: List[VerdictRow]
    provenance: Dict[str, Any]
    outcomes: List[ReplicateOutcome] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(v.verdict != Verdict.FAIL for v in self.verdicts)

    def to_dict(self, include_wall_time: bool = True) -> Dict[str, Any]:
        provenance = dict(self.provenance)
        if not include_wall_time:
            provenance.pop('wall_time', None)
        return {
            'name': self.name,
            'estimates': [e.to_dict() for e in self.estimates],
            'predictions': [p.to_dict() for p in self.predictions],
            'verdicts': [v.to_dict() for v in self.verdicts],
            'provenance': provenance,
        }

    def to_json(self, indent: int = 2, include_wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_wall_time), indent=indent, sort_keys=True)


def _run_replicate(spec: ExperimentSpec, sim: SimConfig, ctx: ExperimentContext, r: int) -> ReplicateOutcome:
    """One replicate: simulate, analyze, observe every target"""
    seed = derive_seed(int(sim.seed), r)
    if spec.conditioning is not None:
        try:
            traj = simulate_conditioned(spec.params, sim, spec.conditioning, eps=spec.analysis.eps,
                                        seed_keys=(r,))
        except RejectionBudgetExceeded as e:
            return ReplicateOutcome(r, seed, None, e.attempts, exhausted=True)
    else:
        traj = simulate(spec.params, replace(sim, seed=seed))

    report = analyze(traj, spec.analysis, ctx.summary)
    cycles = detect_cycles(traj, spec.analysis).durations
    outcome = ReplicateOutcome(r, int(traj.seed), traj.terminal.value, traj.rejections,
                               report=report, cycles=cycles)
    for target in spec.targets:
        outcome.observations[target.key] = target.observe(traj, report, cycles, ctx)
    return outcome


def _reference_solution(spec: ExperimentSpec, sim: SimConfig) -> Optional[ODESolution]:
    odes = [t for t in spec.targets if isinstance(t, OdeDistance)]
    if not odes:
        return None
    K = spec.params.K
    until = max(float(t.until) if t.until is not None else sim.resolved_horizon(K) for t in odes)
    z0 = starting_counts(spec.params, sim) / float(K)
    stride = sim.record.stride or 0.01
    return integrate(LVSystem.from_params(spec.params), z0, until, stride=min(stride, 0.01))


def build_context(spec: ExperimentSpec, sim: Optional[SimConfig] = None) -> ExperimentContext:
    """Fitness summary, predictions and ODE reference shared by every replicate"""
    sim = sim or spec.resolved_sim()
    summary = summarize(spec.params)
    predictions: List[Prediction] = []
    error = ''
    try:
        predictions = predict(summary, spec.params.alpha, mutation1=sim.mutation1_enabled,
                              mutation2=sim.mutation2_enabled)
    except (ClonalError, ValueError) as e:
        error = str(e)
        logger.info(f'No scenario predictions for {spec.name}: {e}')
    return ExperimentContext(
        params=spec.params, summary=summary, sim=sim, analysis=spec.analysis,
        condition=spec.conditioning, predictions=predictions,
        confidence=spec.tolerance.confidence, ode=_reference_solution(spec, sim),
        prediction_error=error)


def run(spec: ExperimentSpec, parallelism: Optional[int] = None) -> ExperimentReport:
    """
    Run every replicate and attach estimates, predictions and verdicts.

    Replicate r uses seed derive_seed(base, r) (attempt a of a conditioned
    replicate uses derive_seed(base, r, a)), and aggregation follows replicate
    order, so the report does not depend on parallelism.
    """
    n_jobs = parallelism if parallelism is not None else spec.parallelism
    started = time.perf_counter()
    sim = spec.resolved_sim()
    ctx = build_context(spec, sim)
    logger.info(f'Running {spec.name}: {spec.replicates} replicates, K={spec.params.K}, '
                f'conditioning={spec.conditioning.value if spec.conditioning else None}, n_jobs={n_jobs}')

    indices = range(spec.replicates)
    if Config.PROGRESS:
        indices = tqdm(indices, desc=spec.name, unit='rep')
    outcomes = Parallel(n_jobs=n_jobs)(delayed(_run_replicate)(spec, sim, ctx, r) for r in indices)

    estimates = [e for target in spec.targets for e in target.estimates(outcomes, ctx)]
    verdicts = [judge(e, spec.tolerance) for e in estimates]
    exhausted = sum(1 for o in outcomes if o.exhausted)
    budget = sum(1 for o in outcomes if o.terminal == Terminal.EVENT_BUDGET.value)
    wall_time = time.perf_counter() - started
    if exhausted:
        logger.warning(f'{exhausted} replicates exhausted their attempt budget')
    if budget:
        logger.warning(f'{budget} replicates ran out of events')
    logger.info(f'{spec.name} finished in {wall_time:.1f}s')

    provenance = {
        'base_seed': int(sim.seed),
        'replicates': spec.replicates,
        'completed': spec.replicates - exhausted,
        'exhausted': exhausted,
        'event_budget': budget,
        'conditioning': spec.conditioning.value if spec.conditioning else None,
        'prediction_error': ctx.prediction_error,
        'wall_time': wall_time,
    }
    return ExperimentReport(spec.name, estimates, ctx.predictions, verdicts, provenance, outcomes)


def verify(report: ExperimentReport, policy: Optional[TolerancePolicy] = None) -> Tuple[int, str]:
    """
    Re-judge every estimate.

    Returns:
        (exit status, table): status 1 if any verdict is Fail, else 0
    """
    if policy is not None:
        report.verdicts = [judge(e, policy) for e in report.estimates]
    status = 0 if report.passed else 1
    return status, format_verdicts(report.verdicts)


def format_verdicts(verdicts: List[VerdictRow]) -> str:
    """Plain-text verdict table"""
    def cell(value):
        return '-' if value is None else f'{value:.4f}'

    header = f'{"target":<48}{"estimate":>12}{"prediction":>12}  {"verdict":<14}tolerance'
    lines = [header, '-' * len(header)]
    for row in verdicts:
        lines.append(f'{row.target:<48}{cell(row.estimate):>12}{cell(row.prediction):>12}  '
                     f'{row.verdict.value:<14}{row.tolerance}')
    return '\n'.join(lines)
