"""Core numerics: geometry, drift fields, Brownian paths, characteristics."""
