"""tautrel: exact-arithmetic tautological relations on moduli of stable curves.

The package builds the strata algebra S_{g,n} on decorated stable dual
graphs, assembles the conjectural relation vectors R(g,n,r; sigma, a),
generates the relation span in a fixed degree and computes exact quotient
ranks over word-size prime fields.

Layout:
  dualgraph   stable dual graphs, canonical form, automorphisms, enumeration
  series      parity-graded power series, bracket polynomials, edge factor
  kappaop     kappa insertion operators (set-partition and brute-force paths)
  strata      the strata algebra: basis, product, gluing/forgetful maps
  relations   relation parameters and the relation vectors themselves
  ideal       the relation span in fixed degree and its structural checks
  exactla     exact sparse linear algebra (modular and rational ranks)
  cli         command-line interface with caching and verification suites
"""

from .errors import InternalConsistencyError, InvalidParameterError, TautrelError

__version__ = "0.1.0"

__all__ = [
    "InternalConsistencyError",
    "InvalidParameterError",
    "TautrelError",
    "__version__",
]
