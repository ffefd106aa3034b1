"""
Analytic predictions for the two-mutation schedule.

Detects the timing regime of the second mutation, lists every outcome
branch with its leading-order probability, final state and duration
coefficient (in units of log K), and evaluates the closed-form statements
about speedup, invasion probability and cyclic dominance.
"""
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from .case_tables import CLASSIFY, CaseTable, case_table
from .ecology import FitnessSummary, cyclic_pattern_violation, summarize
from .exceptions import (CaseMismatch, ConditionsFail, Degenerate, DomainError, InvalidRegime,
                         NoPropositionApplies)
from .lotka_volterra import LVSystem, OutcomeKind, classify
from .phase_analyzer import support_label

logger = logging.getLogger(__name__)

AMBIGUOUS = 'AmbiguousPossiblyPeriodic'
RPS_CYCLES = 'RPSCycles'
BISTABLE = 'Bistable'

# Final states without a single limit point
CYCLING_STATES = (AMBIGUOUS, RPS_CYCLES)


class RegimeKind(Enum):
    FIRST_LEADS = 'FirstLeads'
    SECOND_LEADS = 'SecondLeads'
    LATE_SECOND = 'LateSecond'
    NO_INTERFERENCE = 'NoInterference'
    INVALID = 'Invalid'


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    reason: str = ''

    @property
    def valid(self) -> bool:
        return self.kind != RegimeKind.INVALID

    def __str__(self):
        return self.kind.value if self.valid else f'Invalid({self.reason})'


@dataclass
class Prediction:
    case_label: str
    regime: RegimeKind
    final_state: str
    probability: float
    duration_coeff: Optional[float] = None
    printed_duration_coeff: Optional[float] = None
    point: Optional[Tuple[float, float, float]] = None
    reach: Tuple[int, ...] = ()
    notes: str = ''
    zeeman_classes: Tuple[int, ...] = ()

    @property
    def tag(self) -> str:
        return f'{self.regime.value}:{self.case_label}'

    def duration(self, K: int) -> Optional[float]:
        if self.duration_coeff is None:
            return None
        return self.duration_coeff * math.log(K)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'case': self.tag,
            'final_state': self.final_state,
            'point': None if self.point is None else list(self.point),
            'probability': self.probability,
            'duration_coeff': self.duration_coeff,
            'printed_duration_coeff': self.printed_duration_coeff,
            'reach': list(self.reach),
            'zeeman_classes': list(self.zeeman_classes),
            'notes': self.notes,
        }


def _boundary(alpha: float, thresholds: List[float]) -> bool:
    return any(math.isclose(alpha, t, rel_tol=1e-12, abs_tol=1e-15) for t in thresholds)


def regime(summary: FitnessSummary, alpha: float, mutation1: bool = True,
           mutation2: bool = True) -> Regime:
    """
    Timing regime of the second mutation arriving at alpha log K.

    All displayed inequalities are strict; equality gives Invalid('boundary').
    """
    if not mutation1 or not mutation2:
        return Regime(RegimeKind.NO_INTERFERENCE)
    S = summary.S
    s10, s20, s01 = S[1][0], S[2][0], S[0][1]
    if not s10 > 0:
        return Regime(RegimeKind.INVALID, 's10 must be positive')

    thresholds = [0.0, 1.0 / s10]
    if s20 > 0:
        low = max(0.0, 1.0 / s10 - 1.0 / s20)
        if low < alpha < 1.0 / s10:
            return Regime(RegimeKind.FIRST_LEADS)
        if s20 > s10 and 0 < alpha < 1.0 / s10 - 1.0 / s20:
            return Regime(RegimeKind.SECOND_LEADS)
        thresholds.append(1.0 / s10 - 1.0 / s20)
    if alpha > 1.0 / s10:
        if s01 > 0 or (s01 < 0 and alpha < 1.0 / s10 + 1.0 / abs(s01)):
            return Regime(RegimeKind.LATE_SECOND)
    if s01 < 0:
        thresholds.append(1.0 / s10 + 1.0 / abs(s01))
    if s20 == 0 or s01 == 0 or (s20 > 0 and s20 == s10) or _boundary(alpha, thresholds):
        return Regime(RegimeKind.INVALID, 'boundary')
    return Regime(RegimeKind.INVALID, 'outside every timing regime')


def state_point(summary: FitnessSummary, label: str) -> Optional[Tuple[float, float, float]]:
    """Density triple of an equilibrium label, None for non-point outcomes"""
    if label == 'origin':
        return (0.0, 0.0, 0.0)
    if label.startswith('axis'):
        i = int(label[4])
        point = [0.0, 0.0, 0.0]
        point[i] = summary.nbar[i]
        return tuple(point)
    if label.startswith('pair'):
        i, j = int(label[4]), int(label[5])
        if not summary.pair_feasible(i, j):
            return None
        point = [0.0, 0.0, 0.0]
        point[i], point[j] = summary.pair(i, j)
        return tuple(point)
    if label == 'interior':
        try:
            interior = LVSystem.from_params(summary.params).equilibrium((0, 1, 2))
        except Degenerate:
            return None
        return None if interior is None else tuple(float(x) for x in interior)
    return None


def _classified_state(summary: FitnessSummary) -> str:
    outcome = classify(summary)
    if outcome.kind == OutcomeKind.GLOBAL_EXCLUSION:
        return support_label(outcome.attractors[0])
    if outcome.kind == OutcomeKind.PLANAR_COEXISTENCE:
        return support_label(outcome.attractors[0])
    if outcome.kind == OutcomeKind.INTERIOR_COEXISTENCE:
        return 'interior'
    if outcome.kind == OutcomeKind.BISTABLE:
        return BISTABLE
    return AMBIGUOUS


_TABLE_STATES = {'coexist012': AMBIGUOUS, 'rps_cycles': RPS_CYCLES}
_SWAP_1_2 = {'axis1': 'axis2', 'axis2': 'axis1', 'pair01': 'pair02', 'pair02': 'pair01'}


def _sweep(summary: FitnessSummary, reg: RegimeKind, m: int, arrival: float,
           probability: float, label: str) -> Prediction:
    """A single mutant m arriving at arrival*log K that survives alone"""
    s_m0 = summary.S[m][0]
    s_0m = summary.S[0][m]
    duration = arrival + 1.0 / s_m0
    if s_0m < 0:
        final = f'axis{m}'
        duration += 1.0 / abs(s_0m)
    else:
        final = f'pair0{m}'
    return Prediction(case_label=label, regime=reg, final_state=final, probability=probability,
                      duration_coeff=duration, point=state_point(summary, final), reach=(m,),
                      notes=f'mutant {m} sweeps alone')


def _resident_stays(summary: FitnessSummary, reg: RegimeKind, probability: float) -> Prediction:
    return Prediction(case_label='no-survivor', regime=reg, final_state='axis0',
                      probability=probability, point=state_point(summary, 'axis0'),
                      notes='every mutant dies while rare')


def _leaf(summary: FitnessSummary, alpha: float, reg: RegimeKind, probability: float,
          table: CaseTable) -> Prediction:
    """Resolve the branch where both mutants start growing"""
    if reg == RegimeKind.SECOND_LEADS:
        swapped = summarize(summary.params.relabelled((0, 2, 1)))
        values = dict(swapped.named(), alpha=-alpha)
        match = table.match('first_leads', values)
        final = match.final_state if match.final_state == CLASSIFY else _SWAP_1_2.get(
            match.final_state, match.final_state)
        reach = tuple(sorted(3 - i for i in match.row.reach))
        duration = None if match.duration is None else match.duration + alpha
        printed = None if match.printed_duration is None else match.printed_duration + alpha
    else:
        name = 'first_leads' if reg == RegimeKind.FIRST_LEADS else 'late_second'
        values = dict(summary.named(), alpha=alpha)
        match = table.match(name, values)
        final, reach = match.final_state, match.row.reach
        duration, printed = match.duration, match.printed_duration

    if final == CLASSIFY:
        final = _classified_state(summary)
    final = _TABLE_STATES.get(final, final)

    notes = []
    speed = matched_speed_case(summary)
    if speed and reg == RegimeKind.FIRST_LEADS:
        notes.append(speed)
    if final == 'axis0':
        notes.append('second mutant annihilates the first')
    if final == RPS_CYCLES:
        notes.append('cyclic dominance')
    return Prediction(case_label=match.row.label, regime=reg, final_state=final,
                      probability=probability, duration_coeff=duration,
                      printed_duration_coeff=printed, point=state_point(summary, final),
                      reach=tuple(reach), notes='; '.join(notes),
                      zeeman_classes=tuple(match.zeeman))


def predict(summary: FitnessSummary, alpha: Optional[float] = None, mutation1: bool = True,
            mutation2: bool = True, table: Optional[CaseTable] = None) -> List[Prediction]:
    """
    Every outcome branch with its probability.

    Args:
        summary: Fitness summary of the parameter set
        alpha: Arrival exponent of the second mutant (defaults to params.alpha)
        mutation1: Whether the first mutant is present
        mutation2: Whether the second mutant is injected
        table: Case tables (defaults to the shipped data file)

    Returns:
        Branches with positive probability; probabilities sum to 1

    Raises:
        InvalidRegime: If the timing regime is Invalid
        UnhandledCase: If the sign pattern matches no case
    """
    alpha = summary.params.alpha if alpha is None else float(alpha)
    table = table or case_table
    reg = regime(summary, alpha, mutation1, mutation2)
    if not reg.valid:
        raise InvalidRegime(f'No timing regime applies: {reg.reason}')

    beta = summary.params.beta
    S = summary.S
    p1 = max(S[1][0], 0.0) / beta[1]
    p2 = max(S[2][0], 0.0) / beta[2]
    kind = reg.kind
    branches: List[Prediction] = []

    if kind == RegimeKind.NO_INTERFERENCE:
        present = [m for m, on in ((1, mutation1), (2, mutation2)) if on]
        if not present:
            branches.append(_resident_stays(summary, kind, 1.0))
        else:
            m = present[0]
            p = p1 if m == 1 else p2
            arrival = 0.0 if m == 1 else alpha
            branches.append(_resident_stays(summary, kind, 1.0 - p))
            if p > 0:
                branches.append(_sweep(summary, kind, m, arrival, p, f'mutant{m}-only'))
    elif kind in (RegimeKind.FIRST_LEADS, RegimeKind.SECOND_LEADS):
        branches.append(_resident_stays(summary, kind, (1 - p1) * (1 - p2)))
        branches.append(_sweep(summary, kind, 1, 0.0, p1 * (1 - p2), 'mutant1-only'))
        branches.append(_sweep(summary, kind, 2, alpha, (1 - p1) * p2, 'mutant2-only'))
        branches.append(_leaf(summary, alpha, kind, p1 * p2, table))
    else:
        if S[2][0] > 0:
            branches.append(_resident_stays(summary, kind, (1 - p1) * (1 - p2)))
            branches.append(_sweep(summary, kind, 2, alpha, (1 - p1) * p2, 'mutant2-only'))
        else:
            branches.append(_resident_stays(summary, kind, 1 - p1))
        named = summary.named()
        invader = named.get('s201', 0.0) if S[0][1] > 0 else S[2][1]
        q = max(invader, 0.0) / beta[2]
        if q > 0:
            branches.append(_sweep(summary, kind, 1, 0.0, p1 * (1 - q), 'mutant1-only'))
            branches.append(_leaf(summary, alpha, kind, p1 * q, table))
        else:
            branches.append(_leaf(summary, alpha, kind, p1, table))

    kept = [b for b in branches if b.probability > 0]
    logger.debug(f'{reg}: {len(kept)} branches, total mass {sum(b.probability for b in kept):.12f}')
    return kept


def predictions_to_json(predictions: List[Prediction], indent: int = 2) -> str:
    return json.dumps([p.to_dict() for p in predictions], indent=indent)


def format_predictions(predictions: List[Prediction], K: Optional[int] = None) -> str:
    """Plain-text table, one branch per line"""
    header = f'{"case":<26}{"final state":<28}{"prob":>9}{"T/logK":>10}'
    if K is not None:
        header += f'{"T":>10}'
    lines = [header, '-' * len(header)]
    for p in predictions:
        coeff = '-' if p.duration_coeff is None else f'{p.duration_coeff:.4f}'
        line = f'{p.tag:<26}{p.final_state:<28}{p.probability:>9.4f}{coeff:>10}'
        if K is not None:
            duration = p.duration(K)
            line += f'{"-" if duration is None else f"{duration:.2f}":>10}'
        if p.notes:
            line += f'  ({p.notes})'
        lines.append(line)
    return '\n'.join(lines)


def matched_speed_case(summary: FitnessSummary) -> Optional[str]:
    """
    Which effect the first mutant has on the second one's invasion speed.

    Returns one of 'slowdown-resident', 'speedup-resident' (compared through
    s21), 'slowdown-coexisting', 'speedup-coexisting' (through s201), or None.
    """
    n = summary.named()
    s01, s02, s12, s21, s20 = n['s01'], n['s02'], n['s12'], n['s21'], n['s20']
    if s01 < 0 and s02 < 0 and s12 < 0 < s21:
        if s21 < s20:
            return 'slowdown-resident'
        if s21 > s20:
            return 'speedup-resident'
    s201 = n.get('s201')
    if s01 > 0 and s02 < 0 and s201 is not None and s12 < 0 < s201:
        if s201 < s20:
            return 'slowdown-coexisting'
        if s201 > s20:
            return 'speedup-coexisting'
    return None


def tilde_fitness(S: float, s10: float, s20: float, alpha: float) -> float:
    """Effective growth rate with 1/result = 1/S + (1/s10 - alpha)(1 - s20/S)"""
    return 1.0 / (1.0 / S + (1.0 / s10 - alpha) * (1.0 - s20 / S))


def speedup_fitness(summary: FitnessSummary, alpha: float, case: Optional[str] = None) -> float:
    """
    Effective invasion fitness of the second mutant under interference.

    Raises:
        CaseMismatch: If no speed case holds, or case names one that does not
    """
    matched = matched_speed_case(summary)
    if matched is None:
        raise CaseMismatch('No speedup or slowdown condition holds')
    if case is not None and case != matched:
        raise CaseMismatch(f'Requested {case} but the parameters satisfy {matched}')
    n = summary.named()
    S = n['s21'] if matched.endswith('resident') else n['s201']
    return tilde_fitness(S, n['s10'], n['s20'], alpha)


def rps_cycle_prediction(summary: FitnessSummary, alpha: float, l: int, K: int) -> Tuple[float, float]:
    """
    Probability of at least l cycles and the duration of cycle l.

    Raises:
        ConditionsFail: Naming the first violated inequality
    """
    if l < 1:
        raise ValueError(f'Cycle index starts at 1, got {l}')
    violation = cyclic_pattern_violation(summary)
    if violation is not None:
        raise ConditionsFail(violation)
    n = summary.named()
    s01, s10, s12, s21, s20, s02 = (abs(n['s01']), n['s10'], abs(n['s12']),
                                    n['s21'], abs(n['s20']), n['s02'])
    delay = alpha - 1.0 / s10
    if not delay > 0:
        raise ConditionsFail('alpha - 1/s10 > 0')
    bounds = (
        ('alpha - 1/s10 < 1/|s01| - 1/s21', 1.0 / s01),
        ('alpha - 1/s10 < s02/(|s12||s01|) - 1/s21', s02 / (s12 * s01)),
        ('alpha - 1/s10 < s02 s10/(|s12||s01||s20|) - 1/s21', s02 * s10 / (s12 * s01 * s20)),
    )
    for inequality, bound in bounds:
        if not delay < bound - 1.0 / s21:
            raise ConditionsFail(inequality)

    beta = summary.params.beta
    probability = s10 * s21 / (beta[1] * beta[2])
    x = delay + 1.0 / s21
    ratio = s01 * s12 * s20 / (s02 * s21 * s10)
    duration = x * (1.0 + s01 / s02 + s01 * s12 / (s02 * s10)) * ratio ** (l - 1) * math.log(K)
    return probability, duration


def cycle_ratio(summary: FitnessSummary) -> float:
    """Geometric factor between consecutive cycle durations"""
    n = summary.named()
    return abs(n['s01']) * abs(n['s12']) * abs(n['s20']) / (n['s02'] * n['s21'] * n['s10'])


@dataclass
class InvasionVerdict:
    rule: str
    condition: str
    with_interference: float
    without_interference: float

    def to_dict(self) -> Dict[str, Any]:
        return {'rule': self.rule, 'condition': self.condition,
                'with_interference': self.with_interference,
                'without_interference': self.without_interference}


def invasion_probability_prediction(summary: FitnessSummary, alpha: float) -> InvasionVerdict:
    """
    Invasion probability of the second mutant with and without the first.

    'blocked': interference drives it to 0; 'enabled': interference makes an
    otherwise hopeless mutant invade.

    Raises:
        NoPropositionApplies: If neither rule's hypotheses hold
    """
    kind = regime(summary, alpha).kind
    n = summary.named()
    beta = summary.params.beta
    s01, s10, s20, s21 = n['s01'], n['s10'], n['s20'], n['s21']
    s201 = n.get('s201')

    blocked = None
    if kind == RegimeKind.FIRST_LEADS and s01 > 0 and s201 is not None and s201 < 0:
        blocked = 's01 > 0, s201 < 0, first leads'
    elif kind == RegimeKind.FIRST_LEADS and s01 < 0 and s21 < 0:
        blocked = 's01 < 0, s21 < 0, first leads'
    elif kind == RegimeKind.LATE_SECOND and s01 < 0 and s21 < 0 and s20 > 0:
        blocked = 's01 < 0, s21 < 0, s20 > 0, late second'
    if blocked:
        return InvasionVerdict('blocked', blocked, 0.0, s20 / beta[2])

    if kind == RegimeKind.LATE_SECOND and s20 < 0:
        S = None
        if s01 < 0 and s21 > 0:
            delay = alpha - 1.0 / s10
            gap = 1.0 / abs(s01) - 1.0 / s21
            s12, s02 = n['s12'], n['s02']
            if 0 < delay < gap and (s12 > 0 or (s12 < 0 and s02 < 0)):
                S, condition = s21, 's01 < 0 < s21, early late arrival'
            elif delay > gap:
                S, condition = s21, 's01 < 0 < s21, very late arrival'
        elif s01 > 0 and s201 is not None and s201 > 0:
            S, condition = s201, 's01 > 0, s201 > 0'
        if S is not None:
            return InvasionVerdict('enabled', condition, S * s10 / (beta[2] * beta[1]), 0.0)
    raise NoPropositionApplies('Neither the blocking nor the enabling conditions hold')


def invasion_time_prediction(summary: FitnessSummary, i: int, eps: float,
                             alpha: Optional[float] = None, mutation1: bool = True) -> float:
    """
    Expected time from arrival until mutant i first reaches floor(eps K).

    Growth phases end at floor(eps K) rather than at K, so every exponent is
    written in log(floor(eps K)). When the first mutant changes the second
    one's environment (a speed case in the FirstLeads regime) the second
    grows at s20 until the first mutant takes over, then at s21 or s201.

    Raises:
        DomainError: If mutant i has nonpositive invasion fitness in the resident
    """
    if i not in (1, 2):
        raise ValueError(f'Mutant type must be 1 or 2, got {i}')
    params = summary.params
    alpha = params.alpha if alpha is None else float(alpha)
    K = params.K
    log_k = math.log(K)
    log_eps_k = math.log(max(math.floor(eps * K), 1))
    s_i0 = summary.S[i][0]
    if not s_i0 > 0:
        raise DomainError(f'Mutant {i} cannot invade the resident (s{i}0 = {s_i0:.6g})')
    if i == 1 or not mutation1:
        return log_eps_k / s_i0

    speed = matched_speed_case(summary)
    if speed is None or regime(summary, alpha).kind != RegimeKind.FIRST_LEADS:
        return log_eps_k / s_i0
    n = summary.named()
    s10, s20 = n['s10'], n['s20']
    S = n['s21'] if speed.endswith('resident') else n['s201']
    head = log_eps_k / s10 - alpha * log_k
    return head + (log_eps_k - s20 * head) / S
