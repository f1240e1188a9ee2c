"""Symmetries, conservation laws and quadrature integration for gl-regular
Nijenhuis operators and the associated hydrodynamic-type systems."""

from . import calculus, fields, hierarchy, hydro, jets, jordan, linalg, solver
from .errors import NijHydroError

__version__ = "0.1.0"

__all__ = ["calculus", "fields", "hierarchy", "hydro", "jets", "jordan", "linalg", "solver",
           "NijHydroError", "__version__"]
