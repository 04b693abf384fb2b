"""HEOM simulation of superconducting qubits under 1/f dephasing noise."""

__version__ = "0.1.0"
