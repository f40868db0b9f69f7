"""Experiment services."""
