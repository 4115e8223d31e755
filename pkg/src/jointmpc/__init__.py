"""Sampling-based joint-space model predictive control for articulated robots."""

__version__ = "0.1.0"
