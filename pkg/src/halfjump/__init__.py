"""Numerical toolkit for half-space jump processes with boundary-blow-up kernels."""

__version__ = "0.1.0"
