"""Spectral density estimation for functional time series on grids."""

__version__ = "0.1.0"
