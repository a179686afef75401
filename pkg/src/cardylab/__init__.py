"""Cardy crossing probabilities on general planar domains via critical percolation."""

__version__ = "0.1.0"
