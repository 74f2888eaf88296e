"""Evolutionary PDE discovery with classical and importance-directed operators."""

__version__ = "0.1.0"
