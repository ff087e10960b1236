"""Convex-integration engine for transport equations on the periodic torus."""

__version__ = "0.1.0"
