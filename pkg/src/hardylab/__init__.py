"""Numerical laboratory for the Hardy-weighted fractional heat equation."""

__version__ = "0.1.0"
