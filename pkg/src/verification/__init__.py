"""Weak-form, conversion and stochastic-trace verification."""
