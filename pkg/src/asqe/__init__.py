"""Spectral Galerkin laboratory for stochastic quantization on the 2d torus.

The package builds the Anderson Hamiltonian -Delta + xi - c for white-noise
potential xi on [0, 2pi)^2, and on top of its eigenbasis provides Gaussian
and Gibbs sampling, Wick-renormalized Langevin dynamics, and a self-check
suite tying the numerics back to the continuum theory.
"""

from .errors import NumericalError, ValidationError
from .grid import Field, SpectralSymbol, TorusGrid
from .noise import RngSpec

__all__ = [
    "Field",
    "NumericalError",
    "RngSpec",
    "SpectralSymbol",
    "TorusGrid",
    "ValidationError",
]

__version__ = "0.1.0"
