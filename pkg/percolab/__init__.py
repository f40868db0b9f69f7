"""Invasion percolation and incipient infinite cluster laboratory."""

__version__ = "0.1.0"
