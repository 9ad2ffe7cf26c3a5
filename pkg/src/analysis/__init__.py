"""Renormalization diagnostics, parabolic oracle and uniqueness experiments."""
