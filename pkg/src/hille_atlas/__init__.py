"""Numerical asymptotics for f'' + P(z) f = 0 with polynomial P."""
from .equation import (DerivedConstants, EquationError, EquationSpec, NormalizedEquation,
                       derive_constants, e_n, normalize, parse_poly, validate)

__version__ = "0.1.0"

__all__ = [
    "DerivedConstants", "EquationError", "EquationSpec", "NormalizedEquation",
    "derive_constants", "e_n", "normalize", "parse_poly", "validate", "__version__",
]
