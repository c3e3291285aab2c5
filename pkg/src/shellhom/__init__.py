"""Homogenized bending forms of multiscale shells."""
__version__ = "0.1.0"
