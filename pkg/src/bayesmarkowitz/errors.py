"""Exception hierarchy shared by all modules."""


class BayesMarkowitzError(Exception):
    """Base class for errors raised by this package."""


class DomainError(BayesMarkowitzError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NumericalError(BayesMarkowitzError, ArithmeticError):
    """A numerical routine failed (non-convergence, loss of definiteness, NaN)."""

    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class DegenerateModelError(BayesMarkowitzError, ValueError):
    """The model offers no risky opportunity (zero risk premium)."""


class ConfigError(BayesMarkowitzError, ValueError):
    """Invalid scenario configuration or solver settings."""
