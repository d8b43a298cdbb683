"""Numerical laboratory for Mullins-Sekerka relaxation of graph interfaces."""

from .spectral import SpectralField, TorusGrid, make_grid

__version__ = "0.1.0"

__all__ = ["SpectralField", "TorusGrid", "make_grid", "__version__"]
