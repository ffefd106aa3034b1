"""
Exception hierarchy for the clonal interference toolkit.

Input and precondition errors derive from ValueError as well, so callers
that only guard against ValueError keep working.
"""


class ClonalError(Exception):
    """Base class for every error raised by the toolkit"""


class InvalidParameters(ClonalError, ValueError):
    """Ecological parameters violate their invariants"""


class Degenerate(ClonalError, ValueError):
    """A required denominator vanishes"""


class PairInfeasible(ClonalError, ValueError):
    """A dimorphic equilibrium does not exist"""


class InvalidEta(ClonalError, ValueError):
    """The construction margin eta violates the cycle construction bounds"""


class DomainError(ClonalError, ValueError):
    """Arguments outside the domain of a closed-form formula"""


class NonviableResident(ClonalError, ValueError):
    """The resident type has no positive equilibrium"""


class WrongSignPattern(ClonalError, ValueError):
    """Invasion fitness signs do not form the cyclic dominance pattern"""


class CaseMismatch(ClonalError, ValueError):
    """The requested speed case does not hold for these parameters"""


class ConditionsFail(ClonalError, ValueError):
    """A strict inequality required by a prediction is violated"""

    def __init__(self, inequality: str, message: str = None):
        self.inequality = inequality
        super().__init__(message or f'Condition violated: {inequality}')


class InvalidRegime(ClonalError, ValueError):
    """No arrival regime applies to this (parameters, alpha)"""


class InvalidSpecFile(ClonalError, ValueError):
    """An experiment spec file cannot be parsed or validated"""


class StepFailure(ClonalError):
    """The ODE step-size controller could not meet the tolerance"""


class NotSettled(ClonalError):
    """A trajectory never settled in the target ball before the horizon"""


class NotFound(ClonalError):
    """The Volterra-Lyapunov search found no certificate"""


class RejectionBudgetExceeded(ClonalError):
    """Conditioned simulation exhausted its attempt budget"""

    def __init__(self, attempts: int):
        self.attempts = attempts
        super().__init__(f'Condition not met after {attempts} attempts')


class InsufficientRecording(ClonalError):
    """The recording policy cannot resolve the requested quantity"""


class UnhandledCase(ClonalError):
    """A sign pattern matched no leaf of the case tree"""


class NoPropositionApplies(ClonalError):
    """No invasion-probability statement covers these parameters"""
