"""Cubic nonlinear Schrödinger equation on the two-sphere: spectral tools, solvers and estimate probes."""
from . import estimates, evolution, homsub, norms, resonance, sphere_basis

__version__ = "0.1.0"

__all__ = ["estimates", "evolution", "homsub", "norms", "resonance", "sphere_basis", "__version__"]
