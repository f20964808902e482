"""Pseudo-spectral channel-flow laboratory for perturbations of Couette flow."""

__version__ = "0.1.0"
