"""
Ecological core of the three-type competition model.

Holds the parameter set, monomorphic and dimorphic equilibria, invasion
fitnesses and the pairwise dominance order, together with the conditions
under which rescaled competitions force or permit cyclic dominance.
"""
import json
import logging
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .config import Config
from .exceptions import Degenerate, InvalidEta, InvalidParameters, PairInfeasible

logger = logging.getLogger(__name__)

TYPES = (0, 1, 2)
PAIRS = ((0, 1), (0, 2), (1, 2))


class TypeIndex(IntEnum):
    """Allele label; 0 is the wild type"""
    WILD = 0
    FIRST = 1
    SECOND = 2


def third_type(i: int, j: int) -> int:
    """The type that is neither i nor j"""
    return 3 - i - j


def pair_key(i: int, j: int) -> Tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class EcologyParams:
    """
    One model instance.

    comp[i][j] is the impact of one j-individual on the death rate of an
    i-individual, scaled by 1/K at simulation time.
    """
    beta: Tuple[float, float, float]
    delta: Tuple[float, float, float]
    comp: Tuple[Tuple[float, float, float], ...]
    carrying_capacity: int
    alpha: float = 0.0

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        delta = tuple(float(d) for d in self.delta)
        comp = tuple(tuple(float(c) for c in row) for row in self.comp)
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'delta', delta)
        object.__setattr__(self, 'comp', comp)
        object.__setattr__(self, 'alpha', float(self.alpha))

        if len(beta) != 3 or len(delta) != 3:
            raise InvalidParameters('beta and delta need exactly three entries')
        if len(comp) != 3 or any(len(row) != 3 for row in comp):
            raise InvalidParameters('comp must be a 3x3 matrix')
        if any(not b > 0 for b in beta):
            raise InvalidParameters(f'Birth rates must be positive: {beta}')
        if any(not d >= 0 for d in delta):
            raise InvalidParameters(f'Death rates must be nonnegative: {delta}')
        if any(not c > 0 for row in comp for c in row):
            raise InvalidParameters('Competition coefficients must be positive')
        K = self.carrying_capacity
        if isinstance(K, float) and K.is_integer():
            K = int(K)
            object.__setattr__(self, 'carrying_capacity', K)
        if not isinstance(K, (int, np.integer)) or isinstance(K, bool) or K < 1:
            raise InvalidParameters(f'K must be a positive integer, got {K!r}')
        if not self.alpha >= 0:
            raise InvalidParameters(f'alpha must be nonnegative, got {self.alpha}')

    @property
    def K(self) -> int:
        return int(self.carrying_capacity)

    @property
    def rho(self) -> Tuple[float, float, float]:
        return tuple(b - d for b, d in zip(self.beta, self.delta))

    def comp_matrix(self) -> np.ndarray:
        return np.array(self.comp, dtype=np.float64)

    def with_alpha(self, alpha: float) -> 'EcologyParams':
        return replace(self, alpha=alpha)

    def with_carrying_capacity(self, K: int) -> 'EcologyParams':
        return replace(self, carrying_capacity=K)

    def relabelled(self, order: Sequence[int]) -> 'EcologyParams':
        """Parameters with type order[i] moved to slot i"""
        return EcologyParams(
            beta=tuple(self.beta[o] for o in order),
            delta=tuple(self.delta[o] for o in order),
            comp=tuple(tuple(self.comp[a][b] for b in order) for a in order),
            carrying_capacity=self.carrying_capacity,
            alpha=self.alpha,
        )

    def to_section(self) -> Dict[str, Any]:
        """Flat key-value form: beta0..beta2, delta0..delta2, c00..c22, K, alpha"""
        section: Dict[str, Any] = {}
        for i in TYPES:
            section[f'beta{i}'] = self.beta[i]
        for i in TYPES:
            section[f'delta{i}'] = self.delta[i]
        for i in TYPES:
            for j in TYPES:
                section[f'c{i}{j}'] = self.comp[i][j]
        section['K'] = self.K
        section['alpha'] = self.alpha
        return section

    @classmethod
    def from_section(cls, section: Mapping[str, Any]) -> 'EcologyParams':
        """
        Build parameters from a flat key-value section.

        Args:
            section: Mapping with beta0..beta2, delta0..delta2, c00..c22, K and
                optionally alpha (default 0)

        Raises:
            InvalidParameters: If a key is missing or a value is invalid
        """
        try:
            beta = tuple(float(section[f'beta{i}']) for i in TYPES)
            delta = tuple(float(section.get(f'delta{i}', 0.0)) for i in TYPES)
            comp = tuple(tuple(float(section[f'c{i}{j}']) for j in TYPES) for i in TYPES)
            K = section['K']
        except KeyError as e:
            raise InvalidParameters(f'Missing parameter key: {e.args[0]}')
        except (TypeError, ValueError) as e:
            raise InvalidParameters(f'Malformed parameter value: {e}')
        if isinstance(K, str):
            K = float(K)
        return cls(beta=beta, delta=delta, comp=comp, carrying_capacity=K,
                   alpha=float(section.get('alpha', 0.0)))


@dataclass(frozen=True)
class Infeasible:
    """Marker for a dimorphic equilibrium that does not exist"""
    reason: str

    DEGENERATE = 'degenerate denominator'
    NONPOSITIVE = 'nonpositive coordinate'


class _Absent:
    """Marker for a trimorphic fitness whose resident pair is infeasible"""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return 'ABSENT'

    def __bool__(self):
        return False


ABSENT = _Absent()


class Relation(Enum):
    """Dominance between two types: i PRECEDES j when j ousts i"""
    PRECEDES = '<'
    FOLLOWS = '>'
    NEUTRAL = '='


@dataclass(frozen=True)
class PairOrder:
    i: int
    j: int
    relation: Relation

    def __str__(self):
        symbol = {'<': '≺', '>': '≻', '=': '='}[self.relation.value]
        return f'{self.i}{symbol}{self.j}'


class TransitivityRegime(Enum):
    FORCED_TRANSITIVE = 'ForcedTransitive'
    WEAKLY_TRANSITIVE = 'WeaklyTransitive'
    CYCLE_CONSTRUCTIBLE = 'CycleConstructible'


def monomorphic_equilibrium(params: EcologyParams, i: int) -> float:
    """Resident density (beta_i - delta_i)/C_ii; may be nonpositive"""
    return (params.beta[i] - params.delta[i]) / params.comp[i][i]


def invasion_fitness(params: EcologyParams, i: int, j: int) -> float:
    """
    Initial per-capita growth rate of a rare i-mutant in a j-resident at equilibrium.

    Returns exactly 0 when i == j.
    """
    if i == j:
        return 0.0
    rho = params.rho
    return rho[i] - params.comp[i][j] * monomorphic_equilibrium(params, j)


def coexistence_equilibrium(params: EcologyParams, i: int, j: int,
                            tol: Optional[float] = None) -> Union[Tuple[float, float], Infeasible]:
    """
    Dimorphic equilibrium of the i/j system, ordered as (n_i, n_j).

    Args:
        params: Model parameters
        i, j: Distinct types
        tol: Positivity tolerance (defaults to Config.FEASIBILITY_TOL)

    Returns:
        (n_i, n_j) when both coordinates are strictly positive, otherwise
        Infeasible(NONPOSITIVE)

    Raises:
        Degenerate: If C_ii C_jj == C_ij C_ji
    """
    if i == j:
        raise ValueError('coexistence_equilibrium needs two distinct types')
    tol = Config.FEASIBILITY_TOL if tol is None else tol
    C = params.comp
    rho = params.rho
    den = C[i][i] * C[j][j] - C[i][j] * C[j][i]
    if abs(den) <= tol * max(1.0, abs(C[i][i] * C[j][j])):
        raise Degenerate(f'C{i}{i}*C{j}{j} equals C{i}{j}*C{j}{i}; the {i}/{j} equilibrium is undefined')
    n_i = (C[j][j] * rho[i] - C[i][j] * rho[j]) / den
    n_j = (C[i][i] * rho[j] - C[j][i] * rho[i]) / den
    if n_i <= tol or n_j <= tol:
        return Infeasible(Infeasible.NONPOSITIVE)
    return (n_i, n_j)


def trimorphic_fitness(params: EcologyParams, k: int, i: int, j: int) -> float:
    """
    Fitness of a rare k-mutant in the coexisting i/j population.

    Raises:
        PairInfeasible: If the i/j equilibrium does not exist
    """
    if {i, j, k} != set(TYPES):
        raise ValueError(f'Types must be a permutation of 0, 1, 2: got {k}, {i}, {j}')
    a, b = pair_key(i, j)
    try:
        pair = coexistence_equilibrium(params, a, b)
    except Degenerate as e:
        raise PairInfeasible(str(e))
    if isinstance(pair, Infeasible):
        raise PairInfeasible(f'The {a}/{b} equilibrium is infeasible ({pair.reason})')
    C = params.comp
    return params.rho[k] - C[k][a] * pair[0] - C[k][b] * pair[1]


def pairwise_order(params: EcologyParams, i: int, j: int) -> PairOrder:
    """i PRECEDES j iff S_ij < 0 < S_ji; NEUTRAL iff S_ij S_ji >= 0"""
    if i == j:
        raise ValueError('pairwise_order needs two distinct types')
    s_ij = invasion_fitness(params, i, j)
    s_ji = invasion_fitness(params, j, i)
    if s_ij * s_ji >= 0:
        return PairOrder(i, j, Relation.NEUTRAL)
    if s_ij < 0:
        return PairOrder(i, j, Relation.PRECEDES)
    return PairOrder(i, j, Relation.FOLLOWS)


def is_cyclic(params: EcologyParams) -> bool:
    """True when 0≺1≺2≺0 or the reverse cycle holds"""
    forward = [pairwise_order(params, i, (i + 1) % 3).relation for i in TYPES]
    return all(r == Relation.PRECEDES for r in forward) or all(r == Relation.FOLLOWS for r in forward)


def transitivity_regime(c1: float, c2: float) -> Optional[TransitivityRegime]:
    """
    Which dominance structure rescaled competitions in [c1, c2] allow.

    Equalities fail every strict inequality and give None.
    """
    if not 0 < c1 <= c2:
        raise ValueError(f'Need 0 < c1 <= c2, got ({c1}, {c2})')
    low = max(c1, 1.0 / c2) ** 2
    high = min(1.0 / c1, c2) ** 2
    forward = low > c2
    backward = high < c1
    if forward and backward:
        return TransitivityRegime.FORCED_TRANSITIVE
    if forward or backward:
        return TransitivityRegime.WEAKLY_TRANSITIVE
    if low < c2 and high > c1:
        return TransitivityRegime.CYCLE_CONSTRUCTIBLE
    return None


def _params_from_growth(rho: Sequence[float], comp: Sequence[Sequence[float]],
                        delta: Sequence[float], K: int, alpha: float) -> EcologyParams:
    beta = tuple(r + d for r, d in zip(rho, delta))
    return EcologyParams(beta=beta, delta=tuple(delta), comp=tuple(tuple(row) for row in comp),
                         carrying_capacity=K, alpha=alpha)


def build_rps_parameters(c1: float, c2: float, eta: float, rho: float = 1.0,
                         cdiag: Sequence[float] = (1.0, 1.0, 1.0),
                         delta: Sequence[float] = (0.0, 0.0, 0.0),
                         K: int = 1000, alpha: float = 0.0) -> EcologyParams:
    """
    Parameters with cyclic dominance 0≺1≺2≺0 and rescaled competitions in [c1, c2].

    Growth rates follow rho_0/rho_1 = rho_1/rho_2 = r with r = min(c2, 1/c1) - eta;
    rho is the growth rate of type 2. Rescaled competitions take c2 on the side of
    the loser and c1 on the side of the winner.

    Raises:
        InvalidEta: If c1 < 1 < c2 fails or eta breaks r**2 > c1, r**-2 < c2
    """
    if not c1 < 1.0 < c2:
        raise InvalidEta(f'Cycles need c1 < 1 < c2, got ({c1}, {c2})')
    if not eta > 0:
        raise InvalidEta(f'eta must be positive, got {eta}')
    r = min(c2, 1.0 / c1) - eta
    if not r > 0 or not r * r > c1 or not r ** -2 < c2:
        raise InvalidEta(f'eta={eta} gives ratio {r:.6g}, outside (sqrt(c1), 1/sqrt(c2))^-1 bounds')

    growth = (r * r * rho, r * rho, rho)
    ctilde = [[1.0, c2, c1],
              [c1, 1.0, c2],
              [c2, c1, 1.0]]
    comp = [[ctilde[i][j] * cdiag[j] for j in TYPES] for i in TYPES]
    params = _params_from_growth(growth, comp, delta, K, alpha)
    if not all(pairwise_order(params, i, (i + 1) % 3).relation == Relation.PRECEDES for i in TYPES):
        raise InvalidEta(f'Construction with eta={eta} did not produce 0≺1≺2≺0')
    return params


def build_vl_rps_parameters(eta: float, rho: Sequence[float] = (1.0, 1.0, 1.0),
                            cdiag: Sequence[float] = (2.0, 2.0, 2.0),
                            delta: Sequence[float] = (0.0, 0.0, 0.0),
                            K: int = 1000, alpha: float = 0.0) -> EcologyParams:
    """
    Cyclic parameters whose negated competition matrix is Volterra-Lyapunov stable.

    C_{i+1,i} = eta (rho_{i+1}/rho_i) C_ii and C_{i,i+1} = (1+eta)(rho_i/rho_{i+1}) C_{i+1,i+1},
    indices mod 3, with 0 < eta < 1/2; the weights d_i = 1/rho_i certify stability.
    """
    if not 0 < eta < 0.5:
        raise InvalidEta(f'eta must lie in (0, 1/2), got {eta}')
    comp = [[0.0] * 3 for _ in TYPES]
    for i in TYPES:
        comp[i][i] = cdiag[i]
    for i in TYPES:
        nxt = (i + 1) % 3
        comp[nxt][i] = eta * rho[nxt] / rho[i] * cdiag[i]
        comp[i][nxt] = (1.0 + eta) * rho[i] / rho[nxt] * cdiag[nxt]
    params = _params_from_growth(rho, comp, delta, K, alpha)
    if not is_cyclic(params):
        raise InvalidEta(f'Construction with eta={eta} did not produce cyclic dominance')
    return params


@dataclass(frozen=True)
class FitnessSummary:
    """All derived analytic quantities of one parameter set"""
    params: EcologyParams
    rho: Tuple[float, float, float]
    nbar: Tuple[float, float, float]
    nbar_pair: Dict[Tuple[int, int], Union[Tuple[float, float], Infeasible]]
    S: Tuple[Tuple[float, float, float], ...]
    S_tri: Dict[Tuple[int, Tuple[int, int]], Any]
    ctilde: Tuple[Tuple[float, float, float], ...]

    def fitness(self, i: int, j: int) -> float:
        return self.S[i][j]

    def pair(self, i: int, j: int) -> Union[Tuple[float, float], Infeasible]:
        """Dimorphic equilibrium ordered as (n_i, n_j)"""
        value = self.nbar_pair[pair_key(i, j)]
        if isinstance(value, Infeasible) or i < j:
            return value
        return (value[1], value[0])

    def pair_feasible(self, i: int, j: int) -> bool:
        return not isinstance(self.nbar_pair[pair_key(i, j)], Infeasible)

    def tri(self, k: int, i: int, j: int) -> float:
        """
        Fitness of k in the i/j coexistence.

        Raises:
            PairInfeasible: If the i/j equilibrium does not exist
        """
        value = self.S_tri[(k, pair_key(i, j))]
        if value is ABSENT:
            raise PairInfeasible(f'The {min(i, j)}/{max(i, j)} equilibrium is infeasible')
        return value

    def named(self) -> Dict[str, float]:
        """Invasion fitnesses keyed s01, s10, ..., s201, s012, s102; undefined entries omitted"""
        names: Dict[str, float] = {}
        for i in TYPES:
            for j in TYPES:
                if i != j:
                    names[f's{i}{j}'] = self.S[i][j]
        for (k, (i, j)), value in self.S_tri.items():
            if value is not ABSENT:
                names[f's{k}{i}{j}'] = value
        return names

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready form with the fixed field names"""
        nbar_pair = {}
        for (i, j), value in self.nbar_pair.items():
            if isinstance(value, Infeasible):
                nbar_pair[f'{i}{j}'] = {'infeasible': value.reason}
            else:
                nbar_pair[f'{i}{j}'] = list(value)
        S_tri = {}
        for (k, (i, j)), value in self.S_tri.items():
            S_tri[f'{k}|{i}{j}'] = None if value is ABSENT else value
        return {
            'rho': list(self.rho),
            'nbar': list(self.nbar),
            'nbar_pair': nbar_pair,
            'S': [list(row) for row in self.S],
            'S_tri': S_tri,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def summarize(params: EcologyParams) -> FitnessSummary:
    """Compute every equilibrium and invasion fitness of a parameter set"""
    nbar = tuple(monomorphic_equilibrium(params, i) for i in TYPES)
    S = tuple(tuple(invasion_fitness(params, i, j) for j in TYPES) for i in TYPES)

    nbar_pair: Dict[Tuple[int, int], Union[Tuple[float, float], Infeasible]] = {}
    for i, j in PAIRS:
        try:
            nbar_pair[(i, j)] = coexistence_equilibrium(params, i, j)
        except Degenerate:
            nbar_pair[(i, j)] = Infeasible(Infeasible.DEGENERATE)

    S_tri: Dict[Tuple[int, Tuple[int, int]], Any] = {}
    for i, j in PAIRS:
        k = third_type(i, j)
        pair = nbar_pair[(i, j)]
        if isinstance(pair, Infeasible):
            S_tri[(k, (i, j))] = ABSENT
        else:
            S_tri[(k, (i, j))] = trimorphic_fitness(params, k, i, j)

    C = params.comp
    ctilde = tuple(tuple(C[i][j] / C[j][j] for j in TYPES) for i in TYPES)
    return FitnessSummary(params=params, rho=params.rho, nbar=nbar, nbar_pair=nbar_pair,
                          S=S, S_tri=S_tri, ctilde=ctilde)


# Sign pattern of cyclic dominance 0≺1≺2≺0, in the order the checks are reported
CYCLIC_SIGN_PATTERN = (
    ('s01', '<'), ('s10', '>'),
    ('s12', '<'), ('s21', '>'),
    ('s20', '<'), ('s02', '>'),
)


def cyclic_pattern_violation(summary: FitnessSummary) -> Optional[str]:
    """First inequality of the cyclic sign pattern that fails, or None"""
    named = summary.named()
    for name, sign in CYCLIC_SIGN_PATTERN:
        value = named[name]
        holds = value < 0 if sign == '<' else value > 0
        if not holds:
            return f'{name} {sign} 0'
    return None
