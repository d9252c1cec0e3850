"""Viscous approximation of degenerate convection-diffusion equations."""

__version__ = "0.1.0"
