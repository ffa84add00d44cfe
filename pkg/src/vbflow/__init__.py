"""Pseudospectral Galerkin solver for incompressible flow coupled to a stress-diffusive scalar ``b``."""

__version__ = "0.1.0"
