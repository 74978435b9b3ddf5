"""Simulation and decoding of surface codes built from erasure qubits."""

__version__ = "0.1.0"
