"""Pydantic models for seeds, estimates, reports and run configuration."""
