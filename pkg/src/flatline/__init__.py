"""Flat surfaces, Teichmueller flow and slit-torus direction analysis."""

__version__ = "0.1.0"
