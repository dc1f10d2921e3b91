"""Numerical laboratory for semigroup calculus on Gaussian spaces."""

__version__ = "0.1.0"
