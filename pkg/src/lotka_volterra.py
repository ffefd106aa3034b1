"""
Deterministic competitive Lotka-Volterra systems in two and three dimensions.

Integration, settling times near a stable equilibrium, qualitative
classification from invasion-fitness signs, permanence of cyclic systems
and Volterra-Lyapunov certificates.
"""
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .config import Config
from .ecology import (ABSENT, TYPES, EcologyParams, FitnessSummary, Infeasible,
                      cyclic_pattern_violation, third_type)
from .exceptions import (Degenerate, InvalidParameters, NotFound, NotSettled,
                         StepFailure, WrongSignPattern)

logger = logging.getLogger(__name__)

CONVERGENCE_RESIDUAL = 1e-9


class ODETerminal(Enum):
    CONVERGED = 'Converged'
    HORIZON_REACHED = 'HorizonReached'


@dataclass(frozen=True)
class LVSystem:
    """dz_i/dt = z_i (growth_i - sum_j comp_ij z_j) over the listed types"""
    growth: Tuple[float, ...]
    comp: Tuple[Tuple[float, ...], ...]
    type_labels: Tuple[int, ...]

    def __post_init__(self):
        dim = len(self.type_labels)
        if dim not in (2, 3):
            raise InvalidParameters(f'LV systems have 2 or 3 types, got {dim}')
        if len(set(self.type_labels)) != dim:
            raise InvalidParameters(f'Type labels must be distinct: {self.type_labels}')
        if len(self.growth) != dim or len(self.comp) != dim or any(len(r) != dim for r in self.comp):
            raise InvalidParameters('growth and comp must match the number of types')
        if any(not c > 0 for row in self.comp for c in row):
            raise InvalidParameters('Competition coefficients must be positive')

    @property
    def dim(self) -> int:
        return len(self.type_labels)

    @classmethod
    def from_params(cls, params: EcologyParams, types: Sequence[int] = TYPES) -> 'LVSystem':
        types = tuple(types)
        rho = params.rho
        return cls(growth=tuple(rho[i] for i in types),
                   comp=tuple(tuple(params.comp[i][j] for j in types) for i in types),
                   type_labels=types)

    def _arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.growth, dtype=np.float64), np.asarray(self.comp, dtype=np.float64)

    def rhs(self, t: float, z: np.ndarray) -> np.ndarray:
        growth, comp = self._arrays()
        return z * (growth - comp @ z)

    def residual(self, z: Sequence[float]) -> float:
        """L1 norm of the vector field at z"""
        return float(np.abs(self.rhs(0.0, np.asarray(z, dtype=np.float64))).sum())

    def equilibrium(self, support: Sequence[int]) -> Optional[np.ndarray]:
        """
        Fixed point supported on the given coordinate indices, or None when
        it has a nonpositive coordinate.

        Raises:
            Degenerate: If the restricted competition matrix is singular
        """
        growth, comp = self._arrays()
        idx = list(support)
        sub = comp[np.ix_(idx, idx)]
        if abs(np.linalg.det(sub)) <= Config.FEASIBILITY_TOL * max(1.0, abs(np.prod(np.diag(sub)))):
            raise Degenerate(f'Singular competition block for types {[self.type_labels[i] for i in idx]}')
        values = np.linalg.solve(sub, growth[idx])
        if np.any(values <= Config.FEASIBILITY_TOL):
            return None
        z = np.zeros(self.dim)
        z[idx] = values
        return z

    def fixed_points(self) -> Dict[Tuple[int, ...], np.ndarray]:
        """Every feasible nonzero fixed point keyed by its support, degenerate blocks skipped"""
        points = {}
        for size in range(1, self.dim + 1):
            for support in itertools.combinations(range(self.dim), size):
                try:
                    z = self.equilibrium(support)
                except Degenerate:
                    continue
                if z is not None:
                    points[tuple(self.type_labels[i] for i in support)] = z
        return points


@dataclass
class ODESolution:
    times: np.ndarray
    states: np.ndarray
    terminal: ODETerminal
    type_labels: Tuple[int, ...]

    def full_states(self) -> np.ndarray:
        """States laid out as (n0, n1, n2), zero for types outside the system"""
        full = np.zeros((len(self.times), 3))
        for col, label in enumerate(self.type_labels):
            full[:, label] = self.states[:, col]
        return full

    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _check_start(sys: LVSystem, z0: Sequence[float]) -> np.ndarray:
    z0 = np.asarray(z0, dtype=np.float64)
    if z0.shape != (sys.dim,):
        raise ValueError(f'Initial state needs {sys.dim} coordinates, got {z0.shape}')
    if np.any(z0 < 0) or not np.all(np.isfinite(z0)):
        raise ValueError(f'Initial densities must be finite and nonnegative: {z0}')
    return z0


def _solve(sys: LVSystem, z0: np.ndarray, horizon: float, tol: float,
           t_eval: Optional[np.ndarray] = None, dense: bool = False):
    result = solve_ivp(sys.rhs, (0.0, horizon), z0, method='RK45', rtol=tol,
                       atol=tol * 1e-3, t_eval=t_eval, dense_output=dense)
    if not result.success:
        raise StepFailure(f'Integration failed: {result.message}')
    return result


def integrate(sys: LVSystem, z0: Sequence[float], horizon: float,
              tol: Optional[float] = None, stride: Optional[float] = None) -> ODESolution:
    """
    Integrate the system from z0.

    Args:
        sys: The Lotka-Volterra system
        z0: Nonnegative initial densities
        horizon: Final time, positive
        tol: Relative tolerance (defaults to Config.ODE_RTOL)
        stride: Output spacing; None returns every accepted step

    Returns:
        ODESolution with densities clipped at 0

    Raises:
        StepFailure: If the step-size controller gives up
    """
    if not horizon > 0:
        raise ValueError(f'horizon must be positive, got {horizon}')
    z0 = _check_start(sys, z0)
    tol = Config.ODE_RTOL if tol is None else tol

    if not np.any(z0 > 0):
        times = np.array([0.0, horizon]) if stride is None else _stride_grid(horizon, stride)
        return ODESolution(times=times, states=np.zeros((len(times), sys.dim)),
                           terminal=ODETerminal.CONVERGED, type_labels=sys.type_labels)

    t_eval = None if stride is None else _stride_grid(horizon, stride)
    result = _solve(sys, z0, horizon, tol, t_eval=t_eval)
    states = np.maximum(result.y.T, 0.0)
    terminal = (ODETerminal.CONVERGED if sys.residual(states[-1]) < CONVERGENCE_RESIDUAL
                else ODETerminal.HORIZON_REACHED)
    return ODESolution(times=result.t, states=states, terminal=terminal, type_labels=sys.type_labels)


def _stride_grid(horizon: float, stride: float) -> np.ndarray:
    if not stride > 0:
        raise ValueError(f'stride must be positive, got {stride}')
    steps = int(np.floor(horizon / stride + 1e-9))
    grid = np.arange(steps + 1) * stride
    if grid[-1] < horizon:
        grid = np.append(grid, horizon)
    return grid


def stable_pair_equilibrium(sys: LVSystem, z0: Optional[Sequence[float]] = None,
                            horizon: float = 200.0) -> np.ndarray:
    """
    Attracting equilibrium of a two-type system reached from z0.

    Dominance and coexistence follow from the invasion-fitness signs; under
    bistability the basin is resolved by integrating from z0.
    """
    if sys.dim != 2:
        raise ValueError('stable_pair_equilibrium needs a two-type system')
    growth, comp = sys._arrays()
    nbar = growth / np.diag(comp)
    s01 = growth[0] - comp[0, 1] * nbar[1]
    s10 = growth[1] - comp[1, 0] * nbar[0]
    axis0 = np.array([nbar[0], 0.0])
    axis1 = np.array([0.0, nbar[1]])

    if z0 is not None:
        z = _check_start(sys, z0)
        if z[1] == 0 and z[0] > 0:
            return axis0
        if z[0] == 0 and z[1] > 0:
            return axis1
    if s01 < 0 < s10:
        return axis1
    if s10 < 0 < s01:
        return axis0
    if s01 > 0 and s10 > 0:
        return sys.equilibrium((0, 1))
    if z0 is None:
        raise ValueError('Bistable system: an initial state is needed to pick the basin')
    end = integrate(sys, z0, horizon).final_state()
    return axis0 if np.abs(end - axis0).sum() < np.abs(end - axis1).sum() else axis1


def time_to_equilibrium(sys: LVSystem, z0: Sequence[float], eps: float,
                        horizon: float = 200.0, target: Optional[Sequence[float]] = None,
                        resolution: float = 0.01, tol: Optional[float] = None) -> float:
    """
    First time after which the solution stays within eps**2 (L1) of the stable equilibrium.

    Staying is checked over a window of ten times the entry time, capped by the horizon.

    Raises:
        NotSettled: If no such time exists before the horizon
    """
    if sys.dim != 2:
        raise ValueError('time_to_equilibrium needs a two-type system')
    z0 = _check_start(sys, z0)
    goal = stable_pair_equilibrium(sys, z0, horizon) if target is None else np.asarray(target, float)
    tol = Config.ODE_RTOL if tol is None else tol

    grid = _stride_grid(horizon, resolution)
    if np.any(z0 > 0):
        result = _solve(sys, z0, horizon, tol, dense=True)
        states = np.maximum(result.sol(grid).T, 0.0)
    else:
        states = np.zeros((len(grid), 2))
    inside = np.abs(states - goal).sum(axis=1) <= eps ** 2

    # next_out[k]: first index >= k that lies outside the ball
    n = len(grid)
    next_out = np.full(n + 1, n)
    for k in range(n - 1, -1, -1):
        next_out[k] = next_out[k + 1] if inside[k] else k
    window_end = np.searchsorted(grid, np.minimum(10.0 * grid, horizon), side='right') - 1
    settled = inside & (next_out[:n] > window_end)
    hits = np.flatnonzero(settled)
    if hits.size == 0:
        raise NotSettled(f'No settling within eps^2={eps ** 2:g} before t={horizon:g}')
    return float(grid[hits[0]])


def worst_case_settling(params: EcologyParams, invader: int, eps: float, grid: int = 5,
                        points: Optional[Sequence[Sequence[float]]] = None,
                        horizon: float = 200.0) -> float:
    """
    Largest settling time of the resident/invader system over starts near the resident.

    The default starts form a grid x grid lattice over
    |z_0 - nbar_0| <= 3 eps (C_0a + C_0b)/C_00 and eps/2 <= z_invader <= eps.

    Raises:
        ValueError: If the invader cannot grow in the resident
        NotSettled: Propagated from time_to_equilibrium
    """
    rho = params.rho
    C = params.comp
    nbar0 = rho[0] / C[0][0]
    if not rho[invader] - C[invader][0] * nbar0 > 0:
        raise ValueError(f'Type {invader} cannot invade the resident')
    sys = LVSystem.from_params(params, (0, invader))

    if points is None:
        other = third_type(0, invader)
        radius = 3.0 * eps * (C[0][invader] + C[0][other]) / C[0][0]
        resident = np.linspace(max(nbar0 - radius, 1e-6), nbar0 + radius, grid)
        mutant = np.linspace(eps / 2.0, eps, grid)
        points = [(a, b) for a in resident for b in mutant]

    target = stable_pair_equilibrium(sys, points[0], horizon)
    worst = 0.0
    for z0 in points:
        worst = max(worst, time_to_equilibrium(sys, z0, eps, horizon=horizon, target=target))
    logger.debug(f'Worst settling over {len(points)} starts: {worst:.4f}')
    return worst


class OutcomeKind(Enum):
    GLOBAL_EXCLUSION = 'GlobalExclusion'
    PLANAR_COEXISTENCE = 'PlanarCoexistence'
    INTERIOR_COEXISTENCE = 'InteriorCoexistence'
    BISTABLE = 'Bistable'
    AMBIGUOUS_POSSIBLY_PERIODIC = 'AmbiguousPossiblyPeriodic'


@dataclass
class FixedPoint:
    location: Tuple[float, float, float]
    support: Tuple[int, ...]
    stable: bool

    def to_dict(self) -> Dict[str, Any]:
        return {'location': list(self.location), 'support': list(self.support), 'stable': self.stable}


@dataclass
class QualitativeOutcome:
    fixed_points: List[FixedPoint]
    kind: OutcomeKind
    attractors: List[Tuple[int, ...]] = field(default_factory=list)
    permanent: Optional[bool] = None
    vl_certificate: Optional[Tuple[float, float, float]] = None
    sign_pattern: Dict[str, str] = field(default_factory=dict)

    @property
    def winner(self) -> Optional[int]:
        if self.kind == OutcomeKind.GLOBAL_EXCLUSION:
            return self.attractors[0][0]
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'outcome': self.kind.value,
            'attractors': [list(a) for a in self.attractors],
            'fixed_points': [fp.to_dict() for fp in self.fixed_points],
            'permanent': self.permanent,
            'vl_certificate': None if self.vl_certificate is None else list(self.vl_certificate),
            'sign_pattern': self.sign_pattern,
        }


def _sign(value: float) -> str:
    return '+' if value > 0 else ('-' if value < 0 else '0')


def classify(summary: FitnessSummary) -> QualitativeOutcome:
    """
    Qualitative long-time behaviour of the three-type system.

    Boundary fixed points take their stability from invasion-fitness signs.
    Without a boundary sink the flow on the carrying simplex falls in one of
    Zeeman's classes 26-31 or 33. Signs settle only class 33, where every
    pair coexists and the interior point is a sink: that is reported as
    interior coexistence. Classes 26-31 can carry a heteroclinic cycle or
    periodic orbits around the interior point, so they are reported as
    AMBIGUOUS_POSSIBLY_PERIODIC even when the interior point is locally stable.

    Raises:
        Degenerate: If a needed equilibrium is undefined
    """
    if any(not n > 0 for n in summary.nbar):
        raise InvalidParameters(f'All resident densities must be positive: {summary.nbar}')
    S = summary.S
    fixed_points: List[FixedPoint] = []

    for i in TYPES:
        location = [0.0, 0.0, 0.0]
        location[i] = summary.nbar[i]
        stable = all(S[j][i] < 0 for j in TYPES if j != i)
        fixed_points.append(FixedPoint(tuple(location), (i,), stable))

    for i, j in ((0, 1), (0, 2), (1, 2)):
        pair = summary.nbar_pair[(i, j)]
        if isinstance(pair, Infeasible):
            if pair.reason == Infeasible.DEGENERATE and S[i][j] * S[j][i] > 0:
                raise Degenerate(f'Types {i} and {j} need a dimorphic equilibrium that is undefined')
            continue
        k = third_type(i, j)
        location = [0.0, 0.0, 0.0]
        location[i], location[j] = pair
        tri = summary.S_tri[(k, (i, j))]
        stable = S[i][j] > 0 and S[j][i] > 0 and tri is not ABSENT and tri < 0
        fixed_points.append(FixedPoint(tuple(location), (i, j), stable))

    sinks = [fp for fp in fixed_points if fp.stable]
    sys = LVSystem.from_params(summary.params)
    try:
        interior = sys.equilibrium(TYPES)
    except Degenerate:
        if not sinks:
            raise
        interior = None
    interior_stable = False
    if interior is not None:
        jac = -np.diag(interior) @ np.asarray(sys.comp)
        interior_stable = bool(np.all(np.linalg.eigvals(jac).real < 0))
        fixed_points.append(FixedPoint(tuple(float(x) for x in interior), TYPES, interior_stable))

    all_pairs_coexist = all(S[i][j] > 0 for i in TYPES for j in TYPES if i != j)
    if not sinks:
        if interior is None:
            raise Degenerate('No boundary attractor and no interior fixed point')
        if all_pairs_coexist and interior_stable:
            kind, attractors = OutcomeKind.INTERIOR_COEXISTENCE, [TYPES]
        else:
            kind, attractors = OutcomeKind.AMBIGUOUS_POSSIBLY_PERIODIC, []
    else:
        attractors = [fp.support for fp in sinks]
        if interior_stable:
            attractors.append(TYPES)
        if len(attractors) > 1:
            kind = OutcomeKind.BISTABLE
        elif len(attractors[0]) == 1:
            kind = OutcomeKind.GLOBAL_EXCLUSION
        else:
            kind = OutcomeKind.PLANAR_COEXISTENCE

    sign_pattern = {name: _sign(value) for name, value in summary.named().items()}
    permanent = None
    if cyclic_pattern_violation(summary) is None:
        permanent = permanence_check(summary)
    try:
        certificate = vl_certificate(summary.params.comp)
    except NotFound:
        certificate = None

    return QualitativeOutcome(fixed_points=fixed_points, kind=kind, attractors=attractors,
                              permanent=permanent, vl_certificate=certificate,
                              sign_pattern=sign_pattern)


def permanence_check(summary: FitnessSummary) -> bool:
    """
    Permanence of a cyclic system: |s01||s12||s20| < s02 s21 s10 (strict).

    Raises:
        WrongSignPattern: If the cyclic sign pattern does not hold
    """
    violation = cyclic_pattern_violation(summary)
    if violation is not None:
        raise WrongSignPattern(f'Cyclic sign pattern fails: {violation}')
    S = summary.S
    losses = abs(S[0][1]) * abs(S[1][2]) * abs(S[2][0])
    gains = S[0][2] * S[2][1] * S[1][0]
    return losses < gains


def verify_vl_certificate(comp: Sequence[Sequence[float]], d: Sequence[float]) -> bool:
    """Exact check that the symmetric part of diag(d) comp is positive definite"""
    A = np.asarray(comp, dtype=np.float64)
    weights = np.asarray(d, dtype=np.float64)
    if np.any(weights <= 0):
        return False
    M = weights[:, None] * A
    sym = (M + M.T) / 2.0
    minors = [sym[0, 0], np.linalg.det(sym[:2, :2]), np.linalg.det(sym)]
    return all(m > 0 for m in minors)


def _vl_score(A: np.ndarray, log_d: np.ndarray) -> float:
    d = np.exp(np.concatenate(([0.0], log_d)))
    M = d[:, None] * A
    return float(np.linalg.eigvalsh((M + M.T) / 2.0)[0] / d.max())


def vl_certificate(comp: Sequence[Sequence[float]], grid_size: int = 200,
                   bounds: Tuple[float, float] = (1e-3, 1e3)) -> Tuple[float, float, float]:
    """
    Diagonal weights (1, d1, d2) making the symmetric part of diag(d)(-comp) negative definite.

    Searches a log grid over (d1, d2), refines by coordinate descent and
    verifies the result exactly through leading principal minors.

    Raises:
        NotFound: If the search ends without a verified certificate
    """
    A = np.asarray(comp, dtype=np.float64)
    if A.shape != (3, 3) or np.any(A <= 0):
        raise InvalidParameters('vl_certificate needs a positive 3x3 matrix')

    axis = np.logspace(np.log10(bounds[0]), np.log10(bounds[1]), grid_size)
    d1, d2 = np.meshgrid(axis, axis, indexing='ij')
    weights = np.stack([np.ones(d1.size), d1.ravel(), d2.ravel()], axis=1)
    M = weights[:, :, None] * A[None, :, :]
    sym = (M + np.transpose(M, (0, 2, 1))) / 2.0
    scores = np.linalg.eigvalsh(sym)[:, 0] / weights.max(axis=1)
    best = int(np.argmax(scores))
    log_d = np.log(weights[best, 1:])
    score = float(scores[best])

    step = np.log(axis[1] / axis[0])
    while step > 1e-8:
        improved = False
        for coord in range(2):
            for direction in (1.0, -1.0):
                trial = log_d.copy()
                trial[coord] += direction * step
                trial_score = _vl_score(A, trial)
                if trial_score > score:
                    log_d, score, improved = trial, trial_score, True
        if not improved:
            step /= 2.0

    certificate = (1.0, float(np.exp(log_d[0])), float(np.exp(log_d[1])))
    if score > 0 and verify_vl_certificate(A, certificate):
        return certificate
    raise NotFound(f'No Volterra-Lyapunov weights found (best margin {score:.3g})')
