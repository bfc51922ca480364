"""Numerical toolkit for one-shot converse bounds on anti-degradable channels."""

__version__ = "0.1.0"
