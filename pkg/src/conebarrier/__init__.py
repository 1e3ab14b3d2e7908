"""Numerical toolkit for degenerate fully nonlinear elliptic operators on
polygonal domains with the uniform exterior cone condition: closed-form
cone barriers, monotone wide-stencil Dirichlet solvers, torsion-like
functions and principal-eigenvalue estimation by domain exhaustion.
"""

from .errors import (
    BadBracketError,
    BlowupError,
    ConebarrierError,
    ConfigError,
    EmptyDomainError,
    EmptyGridError,
    GeometryError,
    InadmissibleGammaError,
    InsufficientDataError,
    IterationCollapseError,
    SchemeError,
    SolverError,
    StagnationError,
)
from .operators import EllipticParams, SymMatrix2, check_hypotheses, eval_F, full_operator, pucci_minus, pucci_plus

__all__ = [
    "BadBracketError",
    "BlowupError",
    "ConebarrierError",
    "ConfigError",
    "EllipticParams",
    "EmptyDomainError",
    "EmptyGridError",
    "GeometryError",
    "InadmissibleGammaError",
    "InsufficientDataError",
    "IterationCollapseError",
    "SchemeError",
    "SolverError",
    "StagnationError",
    "SymMatrix2",
    "check_hypotheses",
    "eval_F",
    "full_operator",
    "pucci_minus",
    "pucci_plus",
]

__version__ = "0.1.0"
