"""Local discontinuous Galerkin solver for 1D fractional convection-diffusion."""

__version__ = "0.1.0"
