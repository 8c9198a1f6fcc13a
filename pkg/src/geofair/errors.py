"""Exception hierarchy shared by every geofair module.

Each class maps onto one CLI exit code (see ``geofair.cli``).
"""


class GeofairError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ParseError(GeofairError):
    exit_code = 2


class ValidationError(GeofairError, ValueError):
    exit_code = 3


class SupportError(ValidationError):
    """A divergence or Bayes inversion needs a symbol that has zero mass."""


class ConsistencyError(ValidationError):
    """Supplied marginals disagree with the channels that should produce them."""


class DomainError(ValidationError):
    """An operation was called outside the regime it is defined for."""


class InfeasibleEpsilonError(GeofairError):
    """A perturbation of size eps pushed some probability below zero."""

    exit_code = 4

    def __init__(self, message, *, conditional=None, index=None):
        super().__init__(message)
        self.conditional = conditional
        self.index = index


class NumericalError(GeofairError, ArithmeticError):
    exit_code = 5


class ConditioningError(NumericalError):
    """P(S|X) is singular or too close to singular to invert."""


class ThresholdWarning(UserWarning):
    """eps exceeds a sufficient validity threshold of the quadratic approximation."""


class DegenerateSpectrumWarning(UserWarning):
    """Only unit-gain perturbation directions are available."""
