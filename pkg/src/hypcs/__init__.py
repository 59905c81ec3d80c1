"""Numerical toolkit for Chern-Simons forms on hyperbolic funnels and cusps,
finite-part regularization, and Schottky-group invariants."""

__version__ = "0.1.0"
