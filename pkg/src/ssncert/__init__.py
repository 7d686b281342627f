"""Semismooth Newton solver and second-order regularity certification."""

__version__ = "0.1.0"
