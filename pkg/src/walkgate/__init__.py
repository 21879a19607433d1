"""Exhaustive search for single-qubit gates implemented by plane-wave
scattering on small graphs with four attached semi-infinite tails."""

__version__ = "0.1.0"
