"""Exception types shared across the package."""


class ConebarrierError(Exception):
    """Base class for all package errors."""


class InvalidDomainError(ConebarrierError):
    """Polygon is degenerate, self-intersecting or otherwise unusable."""


class EmptyDomainError(ConebarrierError):
    """An erosion emptied the polygon."""


class EmptyGridError(ConebarrierError):
    """Grid spacing too coarse: no interior node."""


class GeometryError(ConebarrierError):
    """A geometric construction (pole placement, axis search) failed."""


class InadmissibleGammaError(ConebarrierError):
    """No barrier exponent satisfies the admissibility conditions."""


class SolverError(ConebarrierError):
    """Base class for solver failures."""


class BlowupError(SolverError):
    """Iterates crossed the blow-up threshold (numerical nonexistence witness)."""

    def __init__(self, message, sup_norm=None, history=None, extrapolated=False):
        super().__init__(message)
        self.sup_norm = sup_norm
        self.history = history if history is not None else []
        self.extrapolated = extrapolated


class StagnationError(SolverError):
    """No convergence within max_iter at bounded norm."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = history if history is not None else []


class SchemeError(SolverError):
    """Discrete structure violated (e.g. monotone iterates decreasing)."""


class BadBracketError(ConebarrierError):
    """Bisection bracket endpoints are not admissible/inadmissible as required."""


class IterationCollapseError(ConebarrierError):
    """Inverse iteration degenerated (sup of the iterate tends to zero)."""


class InsufficientDataError(ConebarrierError):
    """Not enough usable samples for an estimate."""


class ConfigError(ConebarrierError):
    """Malformed or inconsistent run configuration."""
