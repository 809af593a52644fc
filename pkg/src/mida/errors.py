"""Exception hierarchy shared across the package."""


class MidaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGraphError(MidaError):
    """A graph violates a structural invariant (cycle, bad index, duplicate edge)."""


class GraphFormatError(MidaError):
    """Malformed graph text."""


class CapacityError(MidaError):
    """An enumeration would exceed its configured size cap."""


class InvalidSpecError(MidaError):
    """A structural equation model specification is inconsistent."""


class InvalidDataError(MidaError):
    """A dataset violates a precondition (degenerate column, too few rows, ...)."""


class NumericalError(MidaError):
    """A linear-algebra step failed (singular or ill-conditioned matrix)."""


class DegenerateVarianceError(NumericalError):
    """A variance estimate is zero where inference requires it positive."""


class ConfigError(MidaError):
    """Invalid experiment or CLI configuration."""
