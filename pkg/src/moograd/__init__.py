"""Gradient-based multiobjective optimization toolkit and benchmark harness."""

__version__ = "0.1.0"
