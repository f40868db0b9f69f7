"""Utility modules for the laboratory."""
