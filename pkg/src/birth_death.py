"""
Closed-form formulas for the linear birth-death process.

Used as analytic oracles for the simulator and as ingredients of the
duration predictions.
"""
import math
from dataclasses import dataclass

from .exceptions import DomainError


@dataclass(frozen=True)
class BDParams:
    """Individual birth rate b and death rate d, both positive"""
    b: float
    d: float

    def __post_init__(self):
        if not self.b > 0 or not self.d > 0:
            raise DomainError(f'Birth and death rates must be positive, got b={self.b}, d={self.d}')


def _ratio_power(bd: BDParams, n: float) -> float:
    """(d/b)**n through exp/log, clamped to 0 on underflow and inf on overflow"""
    exponent = n * math.log(bd.d / bd.b)
    if exponent < -745.0:
        return 0.0
    if exponent > 709.0:
        return math.inf
    return math.exp(exponent)


def hitting_prob(bd: BDParams, i: int, j: int, k: int) -> float:
    """
    Probability that the process started at j reaches k before i.

    Args:
        bd: Birth and death rates
        i, j, k: Counts with i <= j <= k (j on a boundary gives 0 or 1)

    Raises:
        DomainError: If the counts are not ordered or i == k
    """
    if not (0 <= i <= j <= k) or i == k:
        raise DomainError(f'Need 0 <= i <= j <= k with i < k, got ({i}, {j}, {k})')
    if j == i:
        return 0.0
    if j == k:
        return 1.0
    if bd.b == bd.d:
        return (j - i) / (k - i)
    return (1.0 - _ratio_power(bd, j - i)) / (1.0 - _ratio_power(bd, k - i))


def extinction_cdf(bd: BDParams, i: int, t: float) -> float:
    """
    Probability that the process started at i is extinct by time t.

    Raises:
        DomainError: On b == d, negative counts or negative times
    """
    if bd.b == bd.d:
        raise DomainError('extinction_cdf has no closed form for b == d')
    if i < 0 or t < 0:
        raise DomainError(f'Need i >= 0 and t >= 0, got i={i}, t={t}')
    if i == 0:
        return 1.0
    if t == 0:
        return 0.0
    b, d = bd.b, bd.d
    growth = math.exp((d - b) * t)
    single = d * (1.0 - growth) / (b - d * growth)
    return single ** i


def survival_prob(bd: BDParams, i: int) -> float:
    """
    Probability of never going extinct from i individuals, 1 - (d/b)**i.

    Raises:
        DomainError: If the process is not supercritical
    """
    if not bd.b > bd.d:
        raise DomainError(f'Survival needs b > d, got b={bd.b}, d={bd.d}')
    if i < 0:
        raise DomainError(f'Need i >= 0, got {i}')
    return 1.0 - _ratio_power(bd, i)


def extinction_prob(bd: BDParams, i: int) -> float:
    """Complement of survival_prob for a supercritical process"""
    return 1.0 - survival_prob(bd, i)


def hitting_time_scale(bd: BDParams, N: int) -> float:
    """
    Asymptotic time to reach N on survival, log(N)/(b - d).

    Raises:
        DomainError: If b <= d or N < 2
    """
    if not bd.b > bd.d:
        raise DomainError(f'Hitting-time scale needs b > d, got b={bd.b}, d={bd.d}')
    if N < 2:
        raise DomainError(f'Need N >= 2, got {N}')
    return math.log(N) / (bd.b - bd.d)


def phase_duration_scale(bd: BDParams, K: int, eps: float) -> float:
    """Time for a surviving mutant to reach floor(eps*K)"""
    return hitting_time_scale(bd, int(math.floor(eps * K)))
