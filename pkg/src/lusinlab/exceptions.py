"""Exception types raised across the package."""


class NodeBudgetError(RuntimeError):
    """A tensor quadrature rule would exceed the configured node budget."""


class DomainError(ValueError):
    """An argument lies outside the domain of a (piecewise) formula."""


class ConvergenceError(RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""


class HypothesisViolation(ValueError):
    """The smallness hypothesis of the stability estimate does not hold."""


class FlowBlowUpError(RuntimeError):
    """A trajectory left the configured bounding ball during integration."""
