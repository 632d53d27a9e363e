"""Flat surfaces with conical singularities and the moduli of flat tori."""

__version__ = "0.1.0"
