"""Simulation toolkit for fluid antenna systems."""

__version__ = "0.1.0"
