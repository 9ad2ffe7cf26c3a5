"""Experiment configuration and run manifests."""
