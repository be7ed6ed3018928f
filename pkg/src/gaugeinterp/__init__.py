"""Gauge-invariant interpolation of lattice gauge fields and states."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
