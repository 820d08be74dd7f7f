"""Exception hierarchy shared across the toolkit.

Two broad classes matter for the CLI exit-code contract: bad inputs
(`InvalidInputError`, exit code 2) and numerical breakdowns
(`NumericalError`, exit code 3).
"""


class RcsLabError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(RcsLabError, ValueError):
    """A precondition on user-supplied data was violated."""


class NumericalError(RcsLabError, ArithmeticError):
    """A solver or eigenvalue routine failed to produce a usable result."""


class InfeasibleMixtureError(InvalidInputError):
    """Mixture weights produce a negative probability mass somewhere."""


class EmptyDataError(InvalidInputError):
    """An estimator received a histogram with zero total counts."""


class NeedsSideInfoError(InvalidInputError):
    """A Regime-B estimator was called with no reference samples (m = 0)."""


class UnsupportedRowKindError(InvalidInputError):
    """An operation received signed-perturbation rows it cannot handle."""


class MissingCoefficientError(InvalidInputError):
    """An estimated label has no fidelity coefficient in the error model."""


class DegenerateRateError(InvalidInputError):
    """Physical-rate conversion hit a nonpositive denominator."""

    def __init__(self, message: str, label=None):
        super().__init__(message)
        self.label = label


class IncompleteModelError(InvalidInputError):
    """A pairwise analysis is missing the matching single-qubit rates."""


class ResourceError(RcsLabError):
    """A computation would exceed the configured memory budget."""
