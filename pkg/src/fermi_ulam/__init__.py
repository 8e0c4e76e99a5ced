"""Fermi-Ulam accelerator with a piecewise linear wall: classical and quantum resonances."""

__version__ = "0.1.0"

from .model import ModelParams, ParameterError, construct_quantum_resonant  # noqa: E402

__all__ = ["ModelParams", "ParameterError", "construct_quantum_resonant", "__version__"]
