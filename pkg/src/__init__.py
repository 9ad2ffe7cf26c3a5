"""Stochastic Transport Lab: Monte Carlo solver and verification laboratory."""

__version__ = "1.0.0"
