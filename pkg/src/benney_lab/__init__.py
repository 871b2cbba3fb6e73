"""Numerical laboratory for the dispersionless Lax reduction of the Benney chain."""

__version__ = "0.1.0"
