"""pistab: exact partial-integral operator algebra, PDE-to-PIE conversion,
and SDP-based exponential stability certification on hyper-rectangles."""

__version__ = "0.1.0"

from .poly import Polynomial, MatPoly, Var, svar, tvar, evar, parse_poly

__all__ = [
    "Polynomial",
    "MatPoly",
    "Var",
    "svar",
    "tvar",
    "evar",
    "parse_poly",
    "__version__",
]
