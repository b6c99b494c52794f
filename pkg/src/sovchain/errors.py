"""Exception types shared across the package."""


class PoleError(ArithmeticError):
    """A gamma-function argument sits on (or numerically at) a pole."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class DegeneratePointError(ValueError):
    """Separated variables coincide, so the density has a 0/0 form there."""


class EvaluationError(ArithmeticError):
    """An integrand returned a non-finite value.

    Attributes
    ----------
    abscissa : object
        The point (or points) at which the bad value was produced.
    """

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class UsageError(ValueError):
    """Invalid call pattern, e.g. too few points for an extrapolation."""
