"""Haag-Ruelle scattering laboratory for quantum spin lattices."""
__version__ = "0.1.0"

from .errors import (AmbiguityError, ConfigError, CoverageError, DiagnosticError, DomainError, HrlabError,
                     NumericalError)
from .lattice import Lattice, Region

__all__ = ["__version__", "Lattice", "Region", "HrlabError", "DomainError", "NumericalError", "AmbiguityError",
           "CoverageError", "DiagnosticError", "ConfigError"]
