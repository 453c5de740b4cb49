"""Globally optimal planar point-set registration by branch and bound."""

__version__ = "0.1.0"
