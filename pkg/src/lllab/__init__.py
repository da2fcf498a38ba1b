"""Numerical laboratory for rotating bosons in the lowest Landau level."""

__version__ = "0.1.0"
