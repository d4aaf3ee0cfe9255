"""Numerical laboratory for comparing quantum interpretations on shared wavefields."""

__version__ = "0.1.0"
