"""Simulation and verification lab for the dissipative nonlinear Schrodinger equation."""
__version__ = "0.1.0"
