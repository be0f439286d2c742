"""Lattice fluid with a suspended rigid rod: simulation and analysis."""

__version__ = "0.1.0"
