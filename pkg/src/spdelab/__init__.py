"""Metastability of stochastic Allen-Cahn dynamics: lattice SDEs, Markov chain
potential theory, Gaussian calculus, spectral Galerkin solvers, Eyring-Kramers
predictions and the regularity-structure algebra of the three-dimensional
equation."""

from .records import SCHEMA_VERSION, NumericalAbort

__version__ = "0.1.0"

__all__ = ["SCHEMA_VERSION", "NumericalAbort", "__version__"]
