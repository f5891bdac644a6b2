"""Error types raised by the solver library."""


class EdgeSspError(Exception):
    """Base class for all library errors."""


class InvalidConfigError(EdgeSspError, ValueError):
    """A scenario or solver parameter is out of range."""


class InfeasibleError(EdgeSspError, ValueError):
    """A decision variable or problem instance admits no feasible point."""


class QueueUnstableError(EdgeSspError, ValueError):
    """The queue stability condition b*mu > lambda fails.

    ``service`` and ``combo`` identify the offending virtual server when known.
    """

    def __init__(self, message, service=None, combo=None):
        super().__init__(message)
        self.service = service
        self.combo = combo


class BracketError(EdgeSspError, RuntimeError):
    """A monotone root search could not bracket its target."""


class NumericalError(EdgeSspError, ArithmeticError):
    """Quadrature or another numeric routine failed to converge."""
