"""Simulation and verification tools for branching processes with immigration."""
__version__ = "0.1.0"
