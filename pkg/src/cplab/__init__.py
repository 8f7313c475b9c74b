"""Numerical laboratory for testing complete positivity of bipartite
distributions and separability of bipartite quantum states."""

__version__ = "0.1.0"
