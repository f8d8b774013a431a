"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
configuration/input problems (exit 1) and numerical failures (exit 2).
"""


class RingTrapError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RingTrapError, ValueError):
    """Argument has the wrong shape, sign or range."""


class InvalidGeometryError(InvalidInputError):
    pass


class SingularGeometryError(InvalidInputError):
    """Two sites share a position."""


class ConfigError(InvalidInputError):
    pass


class NumericalError(RingTrapError, ArithmeticError):
    """Base class for failures of the numerical routes."""


class NonCPError(NumericalError):
    """A rate matrix has an eigenvalue below the PSD tolerance."""


class StiffnessError(NumericalError):
    """Adaptive step size collapsed; use the linear-solve route instead."""


class UnboundedIntegralError(NumericalError):
    """The Liouvillian has no decay channel, so the time integral diverges."""


class OutputError(RingTrapError, OSError):
    """Results could not be written; partial output has been removed."""
