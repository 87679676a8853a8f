"""Exception hierarchy shared by the solvers and the CLI."""


class TandemPricingError(Exception):
    """Base class for all package errors."""


class ConfigError(TandemPricingError, ValueError):
    """Invalid model parameters or a malformed experiment config."""


class DomainError(TandemPricingError, ValueError):
    """A price outside the admissible set, or a state outside the space."""


class CapacityError(TandemPricingError):
    """State space too large to index."""


class NumericalError(TandemPricingError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class BoundInapplicable(TandemPricingError):
    """Bound constants cannot be computed (overloaded queue, no certified N, ...)."""
