"""Numerical verification toolkit for Chern-connection geometry and weighted Bergman estimates."""

__version__ = "0.1.0"
