"""Powder-diffraction dataset factory consistent with extinction rules."""

__version__ = "0.1.0"
