"""Spectral solvers and polynomial-chaos tools for wave equations with a point defect."""

__version__ = "0.1.0"

from . import gpc_kg, gpc_sg, kleingordon, orthopoly, sinegordon, spectral1d

__all__ = [
    "orthopoly",
    "spectral1d",
    "kleingordon",
    "gpc_kg",
    "gpc_sg",
    "sinegordon",
    "__version__",
]
