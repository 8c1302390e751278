"""Exception types shared across the package."""


class AfdiracError(Exception):
    """Base class for all package errors."""


class NonPositiveDefinite(AfdiracError):
    """Metric matrix failed positive-definiteness (amplitude too large)."""


class SqrtFailure(AfdiracError):
    """Symmetric square root is ill-conditioned (eigenvalue below floor)."""


class GridMismatch(AfdiracError):
    """Operands live on different grids."""


class ResolutionError(AfdiracError):
    """Spectral tail of a field exceeds the resolution threshold."""


class CFLViolation(AfdiracError):
    """Requested time step exceeds the stability cap."""


class WraparoundRisk(AfdiracError):
    """Requested final time lets the support wrap around the periodic box."""


class NotFlat(AfdiracError):
    """Operation only defined for the flat metric."""


class NotAdmissible(AfdiracError):
    """Exponent triple fails the admissibility relations."""


class ExcludedEndpoint(AfdiracError):
    """Admissible triple excluded from the massive estimate (q = 2)."""


class ZeroModeDominance(AfdiracError):
    """Projected-out zero frequency carries too much of the field's mass."""


class ConfigError(AfdiracError):
    """Experiment configuration violates the schema."""
