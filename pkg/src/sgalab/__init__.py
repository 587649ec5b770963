"""Numerics for local symplectic groupoids of Poisson structures and their half-density enhancements."""

__version__ = "0.1.0"
