"""Test-time curriculum learning engine for grid puzzle games."""

__version__ = "0.1.0"
