"""Poisson and Cox approximation of wireless propagation processes."""

__version__ = "0.1.0"
