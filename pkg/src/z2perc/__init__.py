"""Percolation order parameters for Z2 lattice gauge theories."""

__version__ = "0.1.0"
