"""Numerical laboratory for a two-coefficient shallow-water wave model and
the full free-surface water-wave problem, with order-of-accuracy experiments."""

from .spectral import PeriodicGrid, RealField, Multiplier

__all__ = ["PeriodicGrid", "RealField", "Multiplier"]
__version__ = "0.1.0"
