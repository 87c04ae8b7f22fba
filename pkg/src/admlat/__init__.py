"""Lattice point counting in boxes for embedding lattices of totally real fields."""

__version__ = "0.1.0"
