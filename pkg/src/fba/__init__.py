"""Functional basis analysis of power-system signal dynamics."""

__version__ = "0.1.0"
